from __future__ import annotations

import numpy as np
import pytest

from agespec.age import build_age_matrices
from agespec.eigen import eig_dense
from agespec.generator import assemble_general
from agespec.model import make_preset
from agespec.quadrature import legendre_orthonormal, make_age_mesh

# criterion number -> (passed, description, detail)
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


class AcceptanceRecorder:
    def __init__(self, number: int, description: str):
        self.number, self.description = number, description
        self.checks: list[tuple[str, bool]] = []

    def check(self, label: str, ok) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)

    def finish(self, errored: bool = False) -> None:
        detail = "; ".join(f"{'ok' if ok else 'FAILED'}: {label}" for label, ok in self.checks)
        if errored:
            detail = (detail + "; " if detail else "") + "raised before completing"
        ACCEPTANCE[self.number] = (self.passed and not errored, self.description, detail)


@pytest.fixture
def acceptance(request):
    made = []

    def make(number: int, description: str) -> AcceptanceRecorder:
        rec = AcceptanceRecorder(number, description)
        made.append(rec)
        return rec

    yield make
    failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
    for rec in made:
        rec.finish(errored=failed and rec.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, desc, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {desc}  [{detail}]")


# ---------------------------------------------------------------------------
# shared expensive objects
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def example1_age_100():
    model = make_preset("example1")
    mesh = make_age_mesh(100, 1.0, [0.5])
    am = build_age_matrices(model, mesh)
    return model, mesh, am, eig_dense(am.K).eigenvalues


@pytest.fixture(scope="session")
def example2_50():
    """Example 2 generator at N = M = 50 with eigenvectors of the two rightmost eigenvalues."""
    model = make_preset("example2")
    mesh = make_age_mesh(50, 1.0, [0.5])
    basis = legendre_orthonormal(50, model.geometry)
    G = assemble_general(model, mesh, basis)
    return model, mesh, basis, G, eig_dense(G.B, want_vectors=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
