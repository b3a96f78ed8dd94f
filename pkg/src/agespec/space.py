"""Galerkin matrices of the convolution operator and the Neumann mass operator
in the orthonormal Legendre basis.

``Jm[j, k] = int_Omega (int_Omega J(x - y) P_k(y) dy) P_j(x) dx`` and, for
Neumann models, ``Cm[j, k] = int_Omega c(x) P_k(x) P_j(x) dx`` with
``c(x) = int_Omega J(x - y) dy``. Both integrals use tensor Gauss-Legendre
rules in the parameter coordinates. On the disk the inner integral carries the
polar Jacobian ``rho``, so ``Jm`` is not symmetric there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import EigensolverFailure, InvalidArgument, QuadratureNonconvergence
from .model import NEUMANN, ModelSpec
from .quadrature import Disk, Interval, SpaceBasis, gauss_legendre, legendre_1d, tensor_gauss

__all__ = [
    "SpaceOperatorMatrix",
    "default_quad_order",
    "build_space_matrix",
    "space_eigenpairs",
    "nystrom_oracle",
]

ENTRY_TOL = 1e-10
IMAG_TOL = 1e-8
_CHUNK = 256  # outer points per block in two dimensions


@dataclass(frozen=True, eq=False)
class SpaceOperatorMatrix:
    Jm: np.ndarray
    Cm: np.ndarray | None
    basis: SpaceBasis
    quad_order: int
    asymmetry: float  # max |Jm - Jm^T| before symmetrisation, relative to max |Jm|
    symmetric: bool

    @property
    def neumann(self) -> bool:
        return self.Cm is not None

    @property
    def operator(self) -> np.ndarray:
        """``Jm - Cm`` for Neumann models, ``Jm`` otherwise."""
        return self.Jm - self.Cm if self.Cm is not None else self.Jm

    @property
    def shift(self) -> float:
        """What the diffusion part subtracts: ``1`` (identity) or ``0`` (mass already in ``Cm``)."""
        return 0.0 if self.neumann else 1.0


def default_quad_order(M: int) -> int:
    return max(2 * M + 2, 64)


def _probe_entries(n: int) -> list[tuple[int, int]]:
    # fixed spread of entries for the doubling check (deterministic)
    pairs = [(0, 0), (n - 1, n - 1), (0, n - 1), (n // 2, n // 3), (n // 3, n // 2)]
    return list(dict.fromkeys(pairs))


class _Assembler:
    """Rows ``A[p, k] = int J(x_p - y) P_k(y) dy`` (inner rule per outer point) and their reductions."""

    def __init__(self, model: ModelSpec, basis: SpaceBasis, q: int):
        self.model, self.basis, self.q = model, basis, q
        g = basis.geometry
        self.outer_pts, self.outer_wts = tensor_gauss(g.bounds, q)
        if g.dim == 1:
            self.outer_pts = self.outer_pts[:, 0]

    def _inner_1d(self, x: np.ndarray):
        """Inner nodes ``(P, q)`` and weights clipped to the kernel support around each ``x``."""
        (lo, hi), = self.basis.geometry.bounds
        s = self.model.kernel.support
        a = np.full_like(x, lo) if s is None else np.maximum(lo, x - s)
        b = np.full_like(x, hi) if s is None else np.minimum(hi, x + s)
        rule = gauss_legendre(self.q, -1.0, 1.0)
        half = 0.5 * (b - a)
        Y = 0.5 * (a + b)[:, None] + half[:, None] * rule.nodes[None, :]
        V = half[:, None] * rule.weights[None, :]
        return Y, V

    def rows(self, cols=None):
        """Return ``(A, c)`` at the outer points: ``A`` restricted to basis columns ``cols``."""
        g = self.basis.geometry
        M = self.basis.M
        if g.dim == 1:
            x = self.outer_pts
            Y, V = self._inner_1d(x)
            KV = self.model.kernel.of_distance(np.abs(x[:, None] - Y)) * V  # (P, q)
            (lo, hi), = g.bounds
            P = legendre_1d(M, lo, hi, Y.ravel()).reshape(Y.shape + (M + 1,))
            if cols is not None:
                P = P[..., cols]
            return np.einsum("pr,prk->pk", KV, P), KV.sum(axis=1)
        # two dimensions: one shared tensor inner rule, evaluated in chunks of outer points
        y_par, y_w = tensor_gauss(g.bounds, self.q)
        y_w = y_w * g.jacobian(y_par)
        Vy = self.basis.vandermonde(y_par)
        if cols is not None:
            Vy = Vy[:, cols]
        Vy = Vy * y_w[:, None]
        yx = g.to_physical(y_par)
        xs = g.to_physical(self.outer_pts)
        A = np.empty((xs.shape[0], Vy.shape[1]))
        c = np.empty(xs.shape[0])
        for s in range(0, xs.shape[0], _CHUNK):
            xc = xs[s:s + _CHUNK]
            r2 = ((xc[:, None, :] - yx[None, :, :]) ** 2).sum(axis=-1)
            Kc = self.model.kernel.of_distance(np.sqrt(r2))
            A[s:s + _CHUNK] = Kc @ Vy
            c[s:s + _CHUNK] = Kc @ y_w
        return A, c

    def reduce(self, A: np.ndarray, rows=None) -> np.ndarray:
        Vx = self.basis.vandermonde(self.outer_pts)
        if rows is not None:
            Vx = Vx[:, rows]
        return Vx.T @ (self.outer_wts[:, None] * A)

    def mass(self, c: np.ndarray) -> np.ndarray:
        Vx = self.basis.vandermonde(self.outer_pts)
        return Vx.T @ ((self.outer_wts * c)[:, None] * Vx)


def _doubling_change(model, basis, q, Jm, Cm) -> float:
    """Largest change of the probe entries when the rule is doubled."""
    probes = _probe_entries(basis.dim)
    rows = sorted({j for j, _ in probes})
    cols = sorted({k for _, k in probes})
    fine = _Assembler(model, basis, 2 * q)
    A2, c2 = fine.rows(cols)
    J2 = fine.reduce(A2, rows)
    change = max(abs(J2[rows.index(j), cols.index(k)] - Jm[j, k]) for j, k in probes)
    if Cm is not None:
        C2 = fine.mass(c2)
        change = max(change, max(abs(C2[j, k] - Cm[j, k]) for j, k in probes))
    return change


def build_space_matrix(model: ModelSpec, basis: SpaceBasis, quad_order: int | None = None) -> SpaceOperatorMatrix:
    """Assemble ``Jm`` (and ``Cm`` for Neumann models) with ``quad_order`` Gauss points per dimension.

    The default order is ``max(2M + 2, 64)``. A handful of fixed entries is
    recomputed with twice the order; while they change by more than ``1e-10``
    the order is doubled (at most three times, then
    :class:`QuadratureNonconvergence`). Except on the disk, the result is
    symmetrised.
    """
    g = basis.geometry
    if type(g) is not type(model.geometry) or g.bounds != model.geometry.bounds:
        raise InvalidArgument("basis geometry does not match the model geometry")
    q = default_quad_order(basis.M) if quad_order is None else int(quad_order)
    if q < basis.M + 1:
        raise InvalidArgument(f"quad_order must be at least M + 1 = {basis.M + 1}, got {q}")

    q_cap = 8 * q
    while True:
        asm = _Assembler(model, basis, q)
        A, c = asm.rows()
        Jm = asm.reduce(A)
        Cm = asm.mass(c) if model.boundary == NEUMANN else None
        change = _doubling_change(model, basis, q, Jm, Cm)
        if change <= ENTRY_TOL:
            break
        if 2 * q > q_cap:
            raise QuadratureNonconvergence(
                f"space matrix entries changed by {change:.2e} when doubling the rule to {2 * q} points"
            )
        q *= 2

    scale = max(np.abs(Jm).max(), np.finfo(float).tiny)
    asym = float(np.abs(Jm - Jm.T).max() / scale)
    symmetric = not isinstance(g, Disk)
    if symmetric:
        Jm = 0.5 * (Jm + Jm.T)
        if Cm is not None:
            Cm = 0.5 * (Cm + Cm.T)
    return SpaceOperatorMatrix(Jm, Cm, basis, q, asym, symmetric)


def space_eigenpairs(S: SpaceOperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, real) and unit eigenvectors (columns) of ``Jm`` or ``Jm - Cm``.

    Eigenvectors are signed so that the represented function has nonnegative
    mean (the largest component decides when the mean vanishes).
    """
    A = S.operator
    if S.symmetric:
        try:
            vals, vecs = sla.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise EigensolverFailure(f"symmetric eigensolver failed: {exc}") from exc
    else:
        try:
            vals, vecs = sla.eig(A)
        except np.linalg.LinAlgError as exc:
            raise EigensolverFailure(f"eigensolver failed: {exc}") from exc
        bad = np.abs(vals.imag).max(initial=0.0)
        if bad > IMAG_TOL:
            raise EigensolverFailure(f"space eigenvalue with imaginary part {bad:.2e} (limit {IMAG_TOL})")
        vals = vals.real
        vecs = vecs.real
        vecs /= np.linalg.norm(vecs, axis=0)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    # only P_0 has nonzero mean: its coefficient carries the sign of the mean
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        key = v[0] if abs(v[0]) > 1e-12 else v[np.argmax(np.abs(v))]
        if key < 0:
            vecs[:, j] = -v
    return vals, vecs


def nystrom_oracle(model: ModelSpec, grid_size: int, k: int = 5) -> np.ndarray:
    """Leading ``k`` eigenvalues of the convolution operator by trapezoid-rule Nystrom.

    Independent of the Legendre basis: the operator is collocated on a uniform
    grid of ``Omega`` and symmetrised with the square roots of the weights.
    Dirichlet only (the Neumann variant subtracts ``c(x)`` on the diagonal).
    """
    g = model.geometry
    if not isinstance(g, Interval):
        raise InvalidArgument("the Nystrom oracle supports interval domains only")
    if grid_size < 2:
        raise InvalidArgument("grid_size must be at least 2")
    x = np.linspace(-g.l, g.l, grid_size)
    w = np.full(grid_size, x[1] - x[0])
    w[[0, -1]] *= 0.5
    K = model.kernel.of_distance(np.abs(x[:, None] - x[None, :]))
    sw = np.sqrt(w)
    A = sw[:, None] * K * sw[None, :]
    if model.boundary == NEUMANN:
        A -= np.diag(K @ w)
    vals = sla.eigvalsh(A)[::-1]
    return vals[:k]
