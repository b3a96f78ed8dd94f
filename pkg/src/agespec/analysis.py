"""Drivers behind the CLI modes: spectra, convergence tables, parameter sweeps
and bifurcation points.

Separable models never form the full generator: the age and space spectra are
computed once per distinct parameter set and combined through
:func:`spectrum_sum`. Non-separable models use :func:`assemble_general`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .age import build_age_matrices
from .eigen import (
    TOL_GAP,
    TOL_REAL,
    eig_dense,
    has_positive_eigenfunction,
    inverse_iteration,
    reconstruct_eigenfunction,
)
from .errors import BracketInvalid, ConfigError
from .generator import assemble_general, spectrum_sum
from .model import PRESET_PARAMS, ModelSpec, make_preset
from .quadrature import legendre_orthonormal, make_age_mesh
from .space import build_space_matrix, space_eigenpairs

__all__ = [
    "SpectrumData",
    "Solver",
    "SweepResult",
    "BifurcationResult",
    "run_converge",
    "run_sweep",
    "run_bifurcate",
]

SPACE_PARAMS = {"l", "R_domain"}
AMBIGUITY_RADIUS = 1e-3
ERROR_FLOOR = 1e-16


@dataclass(frozen=True, eq=False)
class SpectrumData:
    eigenvalues: np.ndarray  # combined spectrum, rightmost first
    gammas: np.ndarray | None = None  # age spectrum (separable)
    thetas: np.ndarray | None = None  # space spectrum (separable)

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0].real)

    @property
    def is_real(self) -> bool:
        lam = self.eigenvalues[0]
        return bool(abs(lam.imag) <= TOL_REAL * max(1.0, abs(lam)))

    @property
    def is_simple(self) -> bool:
        if self.eigenvalues.size < 2:
            return self.is_real
        return bool(self.is_real and self.eigenvalues[0].real - self.eigenvalues[1].real >= TOL_GAP)


class Solver:
    """Spectrum computations for presets with caching of the separable factors.

    The age factor of a separable preset depends only on its age parameters
    and ``N``; the space factor only on the domain size, boundary and ``M``.
    """

    def __init__(self, preset: str, params: dict | None = None):
        self.preset = preset
        self.params = dict(params or {})
        make_preset(preset, **self.params)  # validate early
        self._age: dict = {}
        self._space: dict = {}

    def model(self, **changes) -> ModelSpec:
        return make_preset(self.preset, **{**self.params, **changes})

    def _keys(self, model: ModelSpec):
        age = tuple(sorted((k, v) for k, v in model.params.items() if k not in SPACE_PARAMS | {"d"}))
        space = tuple(sorted((k, v) for k, v in model.params.items() if k in SPACE_PARAMS))
        return age, (model.boundary, space)

    def age_factor(self, model: ModelSpec, N: int):
        key = (self._keys(model)[0], N)
        if key not in self._age:
            mesh = make_age_mesh(N, model.a_dagger, model.age_breakpoints)
            K = build_age_matrices(model, mesh).K
            self._age[key] = (mesh, K, eig_dense(K).eigenvalues)
        return self._age[key]

    def space_factor(self, model: ModelSpec, M: int):
        key = (self._keys(model)[1], M)
        if key not in self._space:
            basis = legendre_orthonormal(M, model.geometry)
            S = build_space_matrix(model, basis)
            thetas, vecs = space_eigenpairs(S)
            self._space[key] = (S, thetas, vecs)
        return self._space[key]

    def spectrum(self, N: int, M: int, problem: str = "full", **changes) -> SpectrumData:
        """Spectrum of the age problem, the space problem or the full generator."""
        model = self.model(**changes)
        if problem == "age":
            if not model.separable:
                raise ConfigError("the age problem alone is only defined for separable presets")
            gammas = self.age_factor(model, N)[2]
            return SpectrumData(gammas, gammas, None)
        if problem == "space":
            S, thetas, _ = self.space_factor(model, M)
            return SpectrumData(thetas.astype(complex), None, thetas)
        if problem != "full":
            raise ConfigError(f"problem must be 'age', 'space' or 'full', got {problem!r}")
        if model.separable:
            gammas = self.age_factor(model, N)[2]
            S, thetas, _ = self.space_factor(model, M)
            return SpectrumData(spectrum_sum(gammas, thetas, model.d, S.shift), gammas, thetas)
        mesh = make_age_mesh(N, model.a_dagger, model.age_breakpoints)
        basis = legendre_orthonormal(M, model.geometry)
        return SpectrumData(eig_dense(assemble_general(model, mesh, basis).B).eigenvalues)

    def lambda0(self, N: int, M: int, **changes) -> float:
        """Rightmost real part; separable presets only need the two leading factors."""
        model = self.model(**changes)
        if model.separable:
            gamma0 = self.age_factor(model, N)[2][0]
            S, thetas, _ = self.space_factor(model, M)
            return float(gamma0.real + model.d * (thetas[0] - S.shift))
        return self.spectrum(N, M, **changes).lambda0

    def principal_eigenfunction_positive(self, N: int, M: int, k: int = 0, **changes) -> bool:
        """Sign test of the eigenfunction of the ``k``-th rightmost eigenvalue."""
        model = self.model(**changes)
        if model.separable:
            mesh, K, gammas = self.age_factor(model, N)
            S, thetas, vecs = self.space_factor(model, M)
            # the k-th sum, with its age and space factors
            sums = gammas[:, None] + model.d * (thetas[None, :] - S.shift)
            order = np.lexsort((-sums.imag.ravel(), np.abs(sums.imag).ravel(), -sums.real.ravel()))
            ia, js = np.unravel_index(order[k], sums.shape)
            f, _ = inverse_iteration(K, gammas[ia])
            Psi = np.kron(f, vecs[:, js])
            basis = S.basis
        else:
            mesh = make_age_mesh(N, model.a_dagger, model.age_breakpoints)
            basis = legendre_orthonormal(M, model.geometry)
            res = eig_dense(assemble_general(model, mesh, basis).B, want_vectors=k + 1)
            Psi = res.eigenvectors[:, k]
        ef = reconstruct_eigenfunction(Psi, mesh, basis, model.Pi0)
        return has_positive_eigenfunction(ef)


# ---------------------------------------------------------------------------
# Convergence tables
# ---------------------------------------------------------------------------

@dataclass
class ConvergeRow:
    N: int
    M: int
    target: int
    abs_error: float
    target_value: complex
    ambiguous: bool


def run_converge(solver: Solver, sizes, reference, track=(0, 1), problem: str = "full") -> list[ConvergeRow]:
    """Distance from tracked reference eigenvalues to the nearest computed eigenvalue.

    ``track`` indexes the reference spectrum (rightmost first, conjugates
    adjacent with positive imaginary part first). A row is flagged ambiguous
    when two computed eigenvalues lie within ``1e-3`` of the target.
    """
    sizes = [tuple(int(v) for v in s) for s in sizes]
    Nr, Mr = (int(v) for v in reference)
    for N, M in sizes:
        if (problem in ("full", "age") and N > Nr) or (problem in ("full", "space") and M > Mr):
            raise ConfigError(f"tested size {(N, M)} exceeds the reference {(Nr, Mr)}")
    ref = solver.spectrum(Nr, Mr, problem).eigenvalues
    if any(not 0 <= k < ref.size for k in track):
        raise ConfigError(f"track indices must lie in [0, {ref.size})")
    targets = {k: ref[k] for k in track}
    rows = []
    for N, M in sizes:
        vals = solver.spectrum(N, M, problem).eigenvalues
        for k, t in targets.items():
            dist = np.abs(vals - t)
            rows.append(ConvergeRow(N, M, k, max(float(dist.min()), ERROR_FLOOR), complex(t),
                                    bool(np.count_nonzero(dist < AMBIGUITY_RADIUS) > 1)))
    return rows


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    p1: str
    p2: str
    rows: list = field(default_factory=list)  # (v1, v2, lambda0, is_real, is_simple)
    boundary: list = field(default_factory=list)  # (v1, v2) with lambda0 = 0
    realness_flips: list = field(default_factory=list)  # (v1, v2) where is_real changes from the previous v2


def _check_param(solver: Solver, name: str) -> None:
    if name not in PRESET_PARAMS[solver.preset]:
        raise ConfigError(f"preset {solver.preset!r} has no parameter {name!r}")


def run_sweep(solver: Solver, N: int, M: int, p1: str, values1, p2: str, values2, tol: float = 1e-8) -> SweepResult:
    """``lambda0`` on the grid ``values1 x values2`` plus the ``lambda0 = 0`` boundary per column.

    Where ``lambda0`` changes sign between neighbours in ``p2`` the crossing is
    refined by Brent's method to ``tol`` in ``p2``.
    """
    _check_param(solver, p1)
    _check_param(solver, p2)
    if p1 == p2:
        raise ConfigError("sweep parameters must differ")
    values1, values2 = list(map(float, values1)), list(map(float, values2))
    if not values1 or not values2:
        raise ConfigError("sweep grid is empty")
    out = SweepResult(p1, p2)
    for v1 in values1:
        lams, reals = [], []
        for v2 in values2:
            spec = _principal(solver, N, M, {p1: v1, p2: v2})
            lams.append(spec[0])
            reals.append(spec[1])
            out.rows.append((v1, v2, *spec))
        for j in range(1, len(values2)):
            if reals[j] != reals[j - 1]:
                out.realness_flips.append((v1, values2[j]))
            if lams[j - 1] == 0.0:
                out.boundary.append((v1, values2[j - 1]))
            elif lams[j - 1] * lams[j] < 0:
                root = optimize.brentq(lambda v: solver.lambda0(N, M, **{p1: v1, p2: v}),
                                       values2[j - 1], values2[j], xtol=tol, rtol=4 * np.finfo(float).eps)
                out.boundary.append((v1, root))
        if lams and lams[-1] == 0.0:
            out.boundary.append((v1, values2[-1]))
    return out


def _principal(solver: Solver, N: int, M: int, changes: dict) -> tuple[float, bool, bool]:
    model = solver.model(**changes)
    if model.separable:
        # only the leading factors matter, but realness/simplicity need the next sum too
        gammas = solver.age_factor(model, N)[2]
        S, thetas, _ = solver.space_factor(model, M)
        top = spectrum_sum(gammas[:4], thetas[:4], model.d, S.shift)
        spec = SpectrumData(top)
    else:
        spec = solver.spectrum(N, M, **changes)
    return spec.lambda0, spec.is_real, spec.is_simple


# ---------------------------------------------------------------------------
# Bifurcation
# ---------------------------------------------------------------------------

@dataclass
class BifurcationResult:
    param: str
    critical_value: float
    lambda0_residual: float
    gamma0: float | None
    theta0: float | None
    iterations: int
    converged: bool  # |lambda0| <= tol at the returned value


def run_bifurcate(solver: Solver, N: int, M: int, param: str, bracket, tol: float = 1e-10) -> BifurcationResult:
    """Parameter value where ``lambda0`` crosses zero, by Brent's method on the bracket.

    The bracket is shrunk to roundoff in the parameter; ``converged`` reports
    whether the final ``|lambda0|`` is within ``tol``.
    """
    _check_param(solver, param)
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise ConfigError(f"bracket must be increasing, got {bracket}")

    def f(v):
        return solver.lambda0(N, M, **{param: v})

    flo, fhi = f(lo), f(hi)
    if flo == 0.0 or fhi == 0.0:
        root, its = (lo if flo == 0.0 else hi), 0
    else:
        if flo * fhi > 0:
            raise BracketInvalid(f"lambda0 has the same sign at {param} = {lo} ({flo:.3e}) and {hi} ({fhi:.3e})")
        root, info = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True)
        its = info.iterations
    resid = f(root)
    model = solver.model(**{param: root})
    gamma0 = theta0 = None
    if model.separable:
        gamma0 = float(solver.age_factor(model, N)[2][0].real)
        theta0 = float(solver.space_factor(model, M)[1][0])
    return BifurcationResult(param, float(root), float(resid), gamma0, theta0, its, bool(abs(resid) <= tol))
