"""Dense eigensolver front end, principal-eigenvalue diagnostics and
eigenfunction reconstruction.

Eigenvalues come from LAPACK (Hessenberg reduction followed by implicitly
shifted QR, or the symmetric tridiagonal path for symmetric input).
Eigenvectors are computed on demand by inverse iteration, only for the
rightmost eigenvalues that are asked for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import EigensolverFailure, InvalidArgument
from .quadrature import AgeMesh, SpaceBasis

__all__ = [
    "TOL_REAL",
    "TOL_GAP",
    "SpectrumResult",
    "PrincipalDiagnostics",
    "Eigenfunction",
    "sort_spectrum",
    "eig_dense",
    "inverse_iteration",
    "principal_eigenvalue",
    "reconstruct_eigenfunction",
    "has_positive_eigenfunction",
]

TOL_REAL = 1e-8
TOL_GAP = 1e-6
RESIDUAL_TOL = 1e-8


def sort_spectrum(values: np.ndarray) -> np.ndarray:
    """Descending real part, then ascending ``|Im|``, then positive imaginary part first."""
    v = np.asarray(values, dtype=complex).ravel()
    order = np.lexsort((-v.imag, np.abs(v.imag), -v.real))
    return v[order]


@dataclass(frozen=True)
class PrincipalDiagnostics:
    value: complex
    is_real: bool
    is_simple: bool
    gap: float
    has_positive_eigenfunction: bool | None = None


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None  # columns, for the leading eigenvalues
    residuals: np.ndarray | None = None

    @property
    def principal(self) -> PrincipalDiagnostics:
        return _diagnose(self.eigenvalues)

    def rightmost(self, k: int = 1) -> np.ndarray:
        return self.eigenvalues[:k]


def _diagnose(values: np.ndarray) -> PrincipalDiagnostics:
    lam = values[0]
    is_real = abs(lam.imag) <= TOL_REAL * max(1.0, abs(lam))
    gap = float(lam.real - values[1].real) if values.size > 1 else np.inf
    return PrincipalDiagnostics(complex(lam), bool(is_real), bool(is_real and gap >= TOL_GAP), gap)


def inverse_iteration(A: np.ndarray, lam: complex, maxit: int = 3) -> tuple[np.ndarray, float]:
    """Eigenvector for the (already computed) eigenvalue ``lam`` and its relative residual."""
    n = A.shape[0]
    real = abs(complex(lam).imag) == 0.0
    dtype = float if real else complex
    shift = complex(lam).real if real else complex(lam)
    normA = np.linalg.norm(A, "fro")
    M = A.astype(dtype) - shift * np.eye(n, dtype=dtype)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(M, check_finite=False)
        piv_min = np.abs(np.diag(lu[0])).min()
        if piv_min == 0.0:
            M -= (np.finfo(float).eps * max(normA, 1.0)) * np.eye(n, dtype=dtype)
            lu = sla.lu_factor(M, check_finite=False)
        v = np.cos(np.arange(n) + 0.5).astype(dtype) + 1.0
        v /= np.linalg.norm(v)
        resid = np.inf
        for _ in range(maxit):
            v = sla.lu_solve(lu, v, check_finite=False)
            v /= np.linalg.norm(v)
            resid = np.linalg.norm(A @ v - lam * v) / max(normA, np.finfo(float).tiny)
            if resid <= 1e-3 * RESIDUAL_TOL:
                break
    return v, float(resid)


def eig_dense(A: np.ndarray, symmetric_hint: bool = False, want_vectors: bool | int = False) -> SpectrumResult:
    """All eigenvalues of a real square matrix, sorted rightmost first.

    ``want_vectors`` may be ``True`` (vectors for every eigenvalue) or an
    integer ``k`` (vectors for the ``k`` rightmost). Eigenvalues of a real
    matrix come back in exactly conjugate pairs.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"need a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgument("matrix has non-finite entries")
    n = A.shape[0]
    if symmetric_hint:
        asym = np.abs(A - A.T).max(initial=0.0)
        if asym > 1e-10 * max(1.0, np.abs(A).max(initial=0.0)):
            warnings.warn(f"symmetric_hint with asymmetric input ({asym:.2e}); using the general solver",
                          stacklevel=2)
            symmetric_hint = False
    try:
        if symmetric_hint:
            vals = sla.eigvalsh(0.5 * (A + A.T), check_finite=False).astype(complex)
        else:
            vals = sla.eigvals(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(f"dense eigensolver failed: {exc}") from exc
    vals = sort_spectrum(vals)
    if not want_vectors:
        return SpectrumResult(vals)
    k = n if want_vectors is True else min(int(want_vectors), n)
    vecs = np.zeros((n, k), dtype=complex)
    res = np.zeros(k)
    for j in range(k):
        lam = vals[j]
        if j > 0 and lam.imag < 0 and vals[j - 1] == np.conj(lam):
            vecs[:, j] = np.conj(vecs[:, j - 1])
            res[j] = res[j - 1]
            continue
        vecs[:, j], res[j] = inverse_iteration(A, lam)
    if np.any(res > RESIDUAL_TOL):
        bad = int(np.argmax(res))
        raise EigensolverFailure(f"eigenvector residual {res[bad]:.2e} above {RESIDUAL_TOL} at index {bad}")
    return SpectrumResult(vals, vecs, res)


# ---------------------------------------------------------------------------
# Eigenfunctions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """Reconstructed eigenfunction on the tensor grid ``ages x space points``.

    ``psi`` is the age-integrated eigenfunction, ``phi = d psi / da`` the
    eigenfunction in the survival-scaled variable, and ``u = Pi0 * phi`` the
    eigenfunction of the original density. Space points are given in the
    parameter coordinates of the basis.
    """

    coeffs: np.ndarray  # (n_age, dim_space)
    mesh: AgeMesh
    basis: SpaceBasis
    Pi0: object

    def psi(self, a, x) -> np.ndarray:
        return self.mesh.lagrange(a) @ self.coeffs @ self.basis.vandermonde(x).T

    def phi(self, a, x) -> np.ndarray:
        return self.mesh.lagrange(a, derivative=True) @ self.coeffs @ self.basis.vandermonde(x).T

    def u(self, a, x) -> np.ndarray:
        return np.asarray(self.Pi0(np.atleast_1d(a)))[:, None] * self.phi(a, x)


def _space_sample(basis: SpaceBasis, n: int) -> np.ndarray:
    g = basis.geometry
    if g.dim == 1:
        (lo, hi), = g.bounds
        return np.linspace(lo, hi, n)
    m = int(np.ceil(np.sqrt(n)))
    (a0, b0), (a1, b1) = g.bounds
    P0, P1 = np.meshgrid(np.linspace(a0, b0, m), np.linspace(a1, b1, m), indexing="ij")
    return np.column_stack([P0.ravel(), P1.ravel()])


def reconstruct_eigenfunction(Psi: np.ndarray, mesh: AgeMesh, basis: SpaceBasis, Pi0) -> Eigenfunction:
    """Synthesize ``sum_i sum_j l_i(a) P_j(x) Psi[(i; j)]`` from an age-major coefficient vector.

    The vector is normalised to unit 2-norm and its phase is fixed so that the
    mean of ``phi`` over a coarse grid is real and nonnegative.
    """
    Psi = np.asarray(Psi)
    if Psi.size != mesh.size * basis.dim:
        raise InvalidArgument(f"coefficient vector has length {Psi.size}, expected {mesh.size * basis.dim}")
    C = Psi.reshape(mesh.size, basis.dim) / np.linalg.norm(Psi)
    if np.iscomplexobj(C):
        big = C.flat[np.argmax(np.abs(C))]
        C = C * (abs(big) / big)
        if np.abs(C.imag).max() <= 1e-14 * np.abs(C).max():
            C = C.real.copy()
    ef = Eigenfunction(C, mesh, basis, Pi0)
    mean = np.mean(ef.phi(np.linspace(0.0, mesh.a_dagger, 11), _space_sample(basis, 11)).real)
    if mean < 0:
        ef = Eigenfunction(-C, mesh, basis, Pi0)
    return ef


def has_positive_eigenfunction(efun: Eigenfunction, n: int = 50, rel_tol: float = 1e-8) -> bool:
    """Whether ``phi`` keeps a single sign on an ``n x n`` (age, space) sample grid.

    Values with ``|phi| <= rel_tol * max |phi|`` are treated as zero. Complex
    eigenfunctions (after phase normalisation) never qualify.
    """
    vals = efun.phi(np.linspace(0.0, efun.mesh.a_dagger, n), _space_sample(efun.basis, n))
    if np.iscomplexobj(vals):
        if np.abs(vals.imag).max() > rel_tol * np.abs(vals).max():
            return False
        vals = vals.real
    scale = np.abs(vals).max()
    if scale == 0:
        return False
    significant = vals[np.abs(vals) > rel_tol * scale]
    return bool(np.all(significant > 0) or np.all(significant < 0))


def principal_eigenvalue(spec: SpectrumResult, efun: Eigenfunction | None = None):
    """Real part of the rightmost eigenvalue together with its diagnostics."""
    if spec.eigenvalues.size == 0:
        raise InvalidArgument("empty spectrum")
    diag = spec.principal
    if not diag.is_real:
        warnings.warn(f"rightmost eigenvalue {diag.value} is not real; no principal eigenvalue", stacklevel=2)
    if efun is not None:
        diag = PrincipalDiagnostics(diag.value, diag.is_real, diag.is_simple, diag.gap,
                                    has_positive_eigenfunction(efun))
    return float(diag.value.real), diag
