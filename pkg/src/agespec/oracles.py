"""Independent verification paths used by the test suite and the ``selftest`` CLI mode.

* ``example1_char_root``: closed-form characteristic function of Example 1 and
  a hand-written bisection (no discretisation, no library root finder).
* ``verify_decomposition``: spectrum of the Kronecker-assembled generator
  against the pairwise sums of separately computed age and space spectra.
* ``verify_psi0_formula``: the leading eigenfunction against its closed form.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BracketInvalid, InvalidArgument

__all__ = [
    "OracleReport",
    "example1_char_integral",
    "example1_char_root",
    "hausdorff_distance",
    "verify_decomposition",
    "verify_psi0_formula",
    "run_all",
]


@dataclass
class OracleReport:
    name: str
    value: float
    method: str
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Example 1 characteristic equation
# ---------------------------------------------------------------------------

def _moment(n: int) -> float:
    # int_{1/2}^{1} (1 - a) a^n da
    lo = 0.5
    return (1.0 / (n + 1) - 1.0 / (n + 2)) - (lo ** (n + 1) / (n + 1) - lo ** (n + 2) / (n + 2))


def example1_char_integral(gamma: float) -> float:
    """``int_{1/2}^{1} (1 - a) exp(-gamma a) da`` in closed form (Taylor series near 0)."""
    g = float(gamma)
    if abs(g) < 0.5:
        total, term = 0.0, 1.0
        for n in range(40):
            total += term * _moment(n)
            term *= -g / (n + 1)
        return total
    e1, eh = math.exp(-g), math.exp(-0.5 * g)
    return e1 / g**2 + 0.5 * eh / g - eh / g**2


def example1_char_root(R: float, tol: float = 1e-15) -> float:
    """Real root of ``8 (1 - ln R) I(gamma) = 1`` by bisection (the rightmost age eigenvalue).

    The bracket starts at ``[-1, 1]`` and is widened up to ``[-50, 50]``.
    """
    if not (0.0 < R < math.e):
        raise InvalidArgument(f"need 0 < R < e, got {R}")
    c = 8.0 * (1.0 - math.log(R))

    def f(g):
        return c * example1_char_integral(g) - 1.0  # decreasing in g

    lo, hi = -1.0, 1.0
    while f(lo) < 0 and lo > -50.0:
        lo = max(2.0 * lo, -50.0)
    while f(hi) > 0 and hi < 50.0:
        hi = min(2.0 * hi, 50.0)
    if not (f(lo) >= 0 >= f(hi)):
        raise BracketInvalid(f"no root of the characteristic equation in [{lo}, {hi}]")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Decomposition and eigenfunction checks
# ---------------------------------------------------------------------------

def hausdorff_distance(a, b) -> float:
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    dist = np.abs(a[:, None] - b[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def _one_sided(a, b) -> float:
    # largest distance from a point of a to the set b
    return float(np.abs(a[:, None] - b[None, :]).min(axis=1).max())


def _pieces(model, N, M):
    from .quadrature import legendre_orthonormal, make_age_mesh

    mesh = make_age_mesh(N, model.a_dagger, model.age_breakpoints)
    basis = legendre_orthonormal(M, model.geometry)
    return mesh, basis


def verify_decomposition(preset: str, N: int, M: int, d: float | None = None, k: int = 30,
                         tol: float = 1e-8, **params) -> OracleReport:
    """Compare the ``k`` rightmost eigenvalues of the assembled generator with the pairwise sums.

    Distance: the larger of (rightmost ``k`` of one set to the whole other set)
    in both directions. ``d`` overrides the diffusion rate (``0`` allowed).
    """
    from .age import build_age_matrices
    from .eigen import eig_dense
    from .generator import assemble_separable, spectrum_sum
    from .model import make_preset
    from .space import build_space_matrix

    model = make_preset(preset, **params)
    if not model.separable:
        raise InvalidArgument("verify_decomposition needs a separable preset")
    d = model.d if d is None else float(d)
    mesh, basis = _pieces(model, N, M)
    K = build_age_matrices(model, mesh).K
    S = build_space_matrix(model, basis)
    direct = eig_dense(assemble_separable(K, S, d).B).eigenvalues
    gammas = eig_dense(K).eigenvalues
    thetas = np.sort(np.linalg.eigvalsh(S.operator) if S.symmetric else np.linalg.eigvals(S.operator).real)
    sums = spectrum_sum(gammas, thetas, d, S.shift)
    dist = max(_one_sided(direct[:k], sums), _one_sided(sums[:k], direct))
    return OracleReport(
        f"decomposition[{preset},N={N},M={M},d={d}]", dist,
        "eigenvalues of kron-assembled B vs sums of separately computed age and space spectra",
        tol, bool(dist <= tol), {"rightmost_direct": [direct[0].real, direct[0].imag]},
    )


def verify_psi0_formula(R: float, N: int, M: int, n_grid: int = 40, tol: float = 1e-6) -> OracleReport:
    """Leading eigenfunction of Example 1 against ``(1 - exp(-gamma0 a)) / gamma0 * g0(x)``.

    ``gamma0`` comes from :func:`example1_char_root` and ``g0`` is the leading
    space eigenvector. Both functions are scaled to unit sup norm and positive
    mean on an ``n_grid x n_grid`` grid; the report value is the sup of the
    difference.
    """
    from .age import build_age_matrices
    from .eigen import eig_dense, reconstruct_eigenfunction
    from .generator import assemble_separable
    from .model import make_preset
    from .space import build_space_matrix, space_eigenpairs

    model = make_preset("example1", R=R)
    mesh, basis = _pieces(model, N, M)
    S = build_space_matrix(model, basis)
    B = assemble_separable(build_age_matrices(model, mesh).K, S, model.d)
    res = eig_dense(B.B, want_vectors=1)
    ef = reconstruct_eigenfunction(res.eigenvectors[:, 0], mesh, basis, model.Pi0)

    a = np.linspace(0.0, model.a_dagger, n_grid)
    (lo, hi), = model.geometry.bounds
    x = np.linspace(lo, hi, n_grid)
    num = np.real(ef.psi(a, x))

    g0 = space_eigenpairs(S)[1][:, 0]
    gamma0 = example1_char_root(R)
    fa = a if abs(gamma0) < 1e-14 else -np.expm1(-gamma0 * a) / gamma0
    exact = np.outer(fa, basis.synthesize(g0, x))

    def normalise(F):
        F = F / np.abs(F).max()
        return -F if F.mean() < 0 else F

    err = float(np.abs(normalise(num) - normalise(exact)).max())
    return OracleReport(
        f"psi0_formula[R={R},N={N},M={M}]", err,
        "closed-form leading eigenfunction with gamma0 from the characteristic-equation bisection",
        tol, bool(err <= tol), {"gamma0": gamma0},
    )


def run_all() -> list[OracleReport]:
    """The oracle battery emitted by ``--mode selftest``."""
    from .age import characteristic_value
    from .model import make_preset

    reports = []
    for R, expected in [(1.0, 0.0), (0.7277628676660066, 0.41570605421445656)]:
        g = example1_char_root(R)
        reports.append(OracleReport(f"example1_char_root[R={R}]", g, "closed form + bisection", 1e-8,
                                    bool(abs(g - expected) <= 1e-8), {"expected": expected}))
    g = example1_char_root(0.7)
    kv = characteristic_value(make_preset("example1", R=0.7), g)
    reports.append(OracleReport("char_value_vs_closed_form[R=0.7]", abs(kv - 1.0),
                                "adaptive quadrature of the characteristic function at the bisection root",
                                1e-10, bool(abs(kv - 1.0) <= 1e-10)))
    reports.append(verify_decomposition("example1", 20, 20))
    reports.append(verify_decomposition("example1", 20, 20, d=0.0, tol=1e-10))
    reports.append(verify_decomposition("neumann1", 20, 20))
    reports.append(verify_psi0_formula(1.0, 20, 20))
    reports.append(verify_psi0_formula(0.7277628676660066, 20, 20))
    return reports
