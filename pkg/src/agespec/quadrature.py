"""Collocation meshes, barycentric Lagrange machinery, quadrature rules and
orthonormal Legendre bases.

Everything here is a pure function of its inputs. The age mesh is made of
Chebyshev zeros, one block of ``N`` zeros per piece, with the age ``0`` and the
interior breakpoints added as extra interpolation nodes. Age ``0`` carries the
value zero (the age-integrated state vanishes there), so it never appears among
the unknowns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_legendre

from .errors import InvalidArgument, NumericalSingularity

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "clenshaw_curtis",
    "chebyshev_zero_nodes",
    "barycentric_weights",
    "lagrange_matrix",
    "differentiation_matrix",
    "AgeMesh",
    "make_age_mesh",
    "DiffIntMatrices",
    "lagrange_diff_matrix",
    "Interval",
    "Rectangle",
    "Disk",
    "SpaceBasis",
    "legendre_orthonormal",
    "legendre_1d",
]


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]
    kind: str  # "GaussLegendre" | "ClenshawCurtis"

    def integrate(self, f) -> float | np.ndarray:
        """Apply the rule to a vectorised callable (or to sampled values)."""
        vals = f(self.nodes) if callable(f) else np.asarray(f)
        return np.tensordot(self.weights, vals, axes=(0, 0))


def _check_interval(lo: float, hi: float) -> None:
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InvalidArgument(f"need a finite interval lo < hi, got ({lo}, {hi})")


def _christoffel_weights(t: np.ndarray) -> np.ndarray:
    # w_i = 1 / sum_k p_k(t_i)^2 over the orthonormal Legendre polynomials
    # of degree < n; more accurate than the library weights for large n
    n = t.size
    p_prev = np.full_like(t, 1.0 / math.sqrt(2.0))
    total = p_prev**2
    if n > 1:
        p = math.sqrt(1.5) * t
        total = total + p**2
        for k in range(1, n - 1):
            a = math.sqrt((2 * k + 1) * (2 * k + 3)) / (k + 1)
            b = k / (k + 1) * math.sqrt((2 * k + 3) / (2 * k - 1))
            p_prev, p = p, a * t * p - b * p_prev
            total += p**2
    return 1.0 / total


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule on ``(lo, hi)``, exact for degree ``2n - 1``."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"Gauss-Legendre needs n >= 1, got {n}")
    _check_interval(lo, hi)
    t, _ = roots_legendre(int(n))
    w = _christoffel_weights(t)
    half = 0.5 * (hi - lo)
    return QuadratureRule(lo + half * (t + 1.0), half * w, (lo, hi), "GaussLegendre")


def clenshaw_curtis(n: int, lo: float = -1.0, hi: float = 1.0) -> QuadratureRule:
    """n-point Clenshaw-Curtis rule on the Chebyshev extreme points.

    Weights follow the classical explicit cosine-sum formula (O(n^2)); the rule
    is exact for polynomials of degree ``n - 1``. Nodes are returned ascending.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument(f"Clenshaw-Curtis needs n >= 2, got {n}")
    _check_interval(lo, hi)
    n = int(n)
    N = n - 1
    theta = np.pi * np.arange(n) / N
    x = np.cos(theta)
    w = np.zeros(n)
    inner = theta[1:-1]
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        k = np.arange(1, N // 2)
        if k.size:
            v -= (2.0 * np.cos(2.0 * np.outer(inner, k)) / (4.0 * k**2 - 1)).sum(axis=1)
        v -= np.cos(N * inner) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        k = np.arange(1, (N - 1) // 2 + 1)
        if k.size:
            v -= (2.0 * np.cos(2.0 * np.outer(inner, k)) / (4.0 * k**2 - 1)).sum(axis=1)
    w[1:-1] = 2.0 * v / N
    half = 0.5 * (hi - lo)
    # x runs from +1 down to -1; flip to ascending
    return QuadratureRule(
        (lo + half * (x + 1.0))[::-1].copy(), (half * w)[::-1].copy(), (lo, hi), "ClenshawCurtis"
    )


# ---------------------------------------------------------------------------
# Barycentric Lagrange interpolation
# ---------------------------------------------------------------------------

def chebyshev_zero_nodes(N: int, lo: float, hi: float) -> np.ndarray:
    """The ``N`` zeros of the Chebyshev polynomial ``T_N`` mapped to ``(lo, hi)``, ascending."""
    if int(N) != N or N < 1:
        raise InvalidArgument(f"need N >= 1, got {N}")
    _check_interval(lo, hi)
    i = np.arange(1, int(N) + 1)
    return lo + 0.5 * (hi - lo) * (1.0 - np.cos((2 * i - 1) * np.pi / (2 * N)))


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights ``1 / prod_{m != j} (x_j - x_m)``, rescaled to max modulus one.

    The products are accumulated in log space, since for a few hundred nodes on
    a short interval they under- or overflow. Any common factor cancels in the
    interpolation and differentiation formulas.
    """
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logw = -np.log(np.abs(diff)).sum(axis=1)
    sign = np.where((diff < 0).sum(axis=1) % 2 == 0, 1.0, -1.0)
    return sign * np.exp(logw - logw.max())


def differentiation_matrix(nodes: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """``D[i, j] = l_j'(x_i)`` for the Lagrange basis on ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    w = barycentric_weights(x) if weights is None else weights
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def lagrange_matrix(
    nodes: np.ndarray,
    t: np.ndarray,
    derivative: bool = False,
    weights: np.ndarray | None = None,
    dmat: np.ndarray | None = None,
) -> np.ndarray:
    """Values (or first derivatives) of every Lagrange basis polynomial at ``t``.

    Returns an array of shape ``(len(t), len(nodes))``. Points coinciding with a
    node get the exact cardinal row (or the differentiation-matrix row).
    """
    x = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = barycentric_weights(x) if weights is None else weights
    diff = t[:, None] - x[None, :]
    hit = diff == 0.0
    rows_hit = hit.any(axis=1)
    safe = np.where(hit, 1.0, diff)
    s = w[None, :] / safe
    s[hit] = 0.0
    S = s.sum(axis=1, keepdims=True)
    S[rows_hit] = 1.0
    L = s / S
    if rows_hit.any():
        L[rows_hit] = hit[rows_hit].astype(float)
    if derivative:
        # the derivative is itself a polynomial interpolated exactly on these
        # nodes, so interpolate the differentiation-matrix columns (stable)
        D = differentiation_matrix(x, w) if dmat is None else dmat
        return L @ D
    return L


# ---------------------------------------------------------------------------
# Age mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AgeMesh:
    """Piecewise Chebyshev-zero mesh on ``[0, a_dagger]``.

    Piece ``k`` spans ``[b_k, b_{k+1}]`` and interpolates on its left end, its
    ``N`` zeros and (except for the last piece) its right end. The unknowns sit
    at ``active_nodes = full_nodes[1:]``; a breakpoint value is shared by the
    two pieces meeting there, so interpolants are continuous. Derivatives at a
    breakpoint are taken from the piece on its left.
    """

    N: int
    a_dagger: float
    breakpoints: tuple[float, ...]
    nodes: tuple[np.ndarray, ...]
    full_nodes: np.ndarray
    _local: tuple = field(repr=False)

    @property
    def n_pieces(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def active_nodes(self) -> np.ndarray:
        return self.full_nodes[1:]

    @property
    def size(self) -> int:
        return self.full_nodes.size - 1

    def piece_nodes(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Local interpolation nodes of piece ``k`` and their active indices (-1 for age 0)."""
        x, idx, _, _ = self._local[k]
        return x, idx

    def piece_of(self, a: np.ndarray) -> np.ndarray:
        """Index of the piece owning each age; a breakpoint belongs to the piece on its left."""
        inner = np.asarray(self.breakpoints[1:-1])
        return np.searchsorted(inner, np.asarray(a, dtype=float), side="left")

    def lagrange(self, a, derivative: bool = False, piece: int | None = None) -> np.ndarray:
        """Matrix ``(len(a), size)`` of basis values ``l_h(a)`` (or ``l_h'(a)``) over active nodes.

        With ``piece`` given, every point is evaluated with that piece's
        polynomial (one-sided limits at its ends); otherwise each point uses
        the piece returned by :meth:`piece_of`.
        """
        a = np.atleast_1d(np.asarray(a, dtype=float))
        out = np.zeros((a.size, self.size))
        owners = np.full(a.size, piece) if piece is not None else self.piece_of(a)
        for k in np.unique(owners):
            sel = owners == k
            x, idx, w, D = self._local[k]
            block = lagrange_matrix(x, a[sel], derivative=derivative, weights=w, dmat=D)
            keep = idx >= 0
            out[np.ix_(sel, idx[keep])] = block[:, keep]
        return out

    def interpolate(self, values: np.ndarray, a, derivative: bool = False) -> np.ndarray:
        """Evaluate the piecewise interpolant of node ``values`` (leading axis = nodes)."""
        return np.tensordot(self.lagrange(a, derivative), values, axes=(1, 0))


def make_age_mesh(N: int, a_dagger: float, breakpoints: Sequence[float] = ()) -> AgeMesh:
    """Build the mesh with ``N`` Chebyshev zeros in each piece between breakpoints."""
    if int(N) != N or N < 1:
        raise InvalidArgument(f"need N >= 1, got {N}")
    if not a_dagger > 0:
        raise InvalidArgument(f"a_dagger must be positive, got {a_dagger}")
    inner = sorted({float(b) for b in breakpoints})
    if any(not (0.0 < b < a_dagger) for b in inner):
        raise InvalidArgument(f"breakpoints must lie in (0, {a_dagger}), got {inner}")
    bps = (0.0, *inner, float(a_dagger))
    N = int(N)
    pieces = tuple(chebyshev_zero_nodes(N, bps[k], bps[k + 1]) for k in range(len(bps) - 1))
    full = [0.0]
    for k, z in enumerate(pieces):
        full.extend(z)
        if k < len(pieces) - 1:
            full.append(bps[k + 1])
    full_nodes = np.array(full)
    if np.any(np.diff(full_nodes) <= 0):
        raise InvalidArgument("mesh nodes are not strictly increasing (pieces too narrow?)")
    local = []
    K = len(pieces)
    for k in range(K):
        start = k * (N + 1)
        stop = start + N + 2 if k < K - 1 else start + N + 1
        x = full_nodes[start:stop]
        w = barycentric_weights(x)
        local.append((x, np.arange(start, stop) - 1, w, differentiation_matrix(x, w)))
    return AgeMesh(N, float(a_dagger), bps, pieces, full_nodes, tuple(local))


@dataclass(frozen=True, eq=False)
class DiffIntMatrices:
    D: np.ndarray
    D_inv: np.ndarray


def lagrange_diff_matrix(mesh: AgeMesh) -> DiffIntMatrices:
    """Differentiation matrix on the active nodes and its inverse.

    Row ``i`` of ``D`` holds ``l_h'(a_i)`` (the column of age 0 is dropped);
    row ``i`` of ``D_inv`` integrates node values of a derivative over
    ``[0, a_i]``.
    """
    n = mesh.size
    D = np.zeros((n, n))
    N = mesh.N
    for k in range(mesh.n_pieces):
        x, idx, _, Dloc = mesh._local[k]
        rows = idx[1:]  # zeros of the piece and its right breakpoint
        keep = idx >= 0
        D[np.ix_(rows, idx[keep])] = Dloc[1:][:, keep]
    D_inv = np.linalg.inv(D)
    resid = np.abs(D @ D_inv - np.eye(n)).sum(axis=1).max()
    if not np.isfinite(resid) or resid > 1e-8:
        raise NumericalSingularity(f"differentiation matrix inversion residual {resid:.3e} (N={N})")
    return DiffIntMatrices(D, D_inv)


# ---------------------------------------------------------------------------
# Space geometries and orthonormal Legendre bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """``Omega = (-l, l)``."""

    l: float
    dim = 1

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((-self.l, self.l),)

    def to_physical(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float).reshape(-1)

    def jacobian(self, p: np.ndarray) -> np.ndarray:
        return np.ones(np.asarray(p).shape[0])


@dataclass(frozen=True)
class Rectangle:
    """``Omega = (-lx, lx) x (-ly, ly)``."""

    lx: float
    ly: float
    dim = 2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((-self.lx, self.lx), (-self.ly, self.ly))

    def to_physical(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float).reshape(-1, 2)

    def jacobian(self, p: np.ndarray) -> np.ndarray:
        return np.ones(np.asarray(p).shape[0])


@dataclass(frozen=True)
class Disk:
    """Disk of radius ``R``, parametrised by polar coordinates on ``[0, R] x [0, 2 pi]``."""

    R: float
    dim = 2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((0.0, self.R), (0.0, 2.0 * math.pi))

    def to_physical(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        return np.column_stack([p[:, 0] * np.cos(p[:, 1]), p[:, 0] * np.sin(p[:, 1])])

    def jacobian(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float).reshape(-1, 2)[:, 0].copy()


Geometry = Interval | Rectangle | Disk


def _validate_geometry(g) -> None:
    if not isinstance(g, (Interval, Rectangle, Disk)):
        raise InvalidArgument(f"unknown geometry {g!r}")
    for lo, hi in g.bounds:
        if not (np.isfinite(hi) and hi > lo):
            raise InvalidArgument(f"degenerate geometry {g!r}")


def legendre_1d(M: int, lo: float, hi: float, x: np.ndarray) -> np.ndarray:
    """Orthonormal Legendre polynomials of degree ``0..M`` on ``(lo, hi)``, shape ``(len(x), M+1)``."""
    t = (2.0 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)
    scale = np.sqrt((2.0 * np.arange(M + 1) + 1.0) / (hi - lo))
    return npleg.legvander(t, M) * scale


def tensor_gauss(bounds, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre points ``(P, dim)`` and weights on a box; last coordinate fastest."""
    rules = [gauss_legendre(q, lo, hi) for lo, hi in bounds]
    if len(rules) == 1:
        return rules[0].nodes[:, None], rules[0].weights.copy()
    X1, X2 = np.meshgrid(rules[0].nodes, rules[1].nodes, indexing="ij")
    W = np.outer(rules[0].weights, rules[1].weights)
    return np.column_stack([X1.ravel(), X2.ravel()]), W.ravel()


@dataclass(frozen=True, eq=False)
class SpaceBasis:
    """Orthonormal (tensor) Legendre basis on the parameter box of a geometry.

    For two-dimensional geometries the basis index is ``j = j1 * (M + 1) + j2``.
    The inner product is the unweighted L2 product on the parameter box, also
    for the disk.
    """

    M: int
    geometry: Geometry
    quad_points: np.ndarray
    quad_weights: np.ndarray

    @property
    def dim(self) -> int:
        return (self.M + 1) ** self.geometry.dim

    def vandermonde(self, p) -> np.ndarray:
        """Basis values at parameter points ``p`` (shape ``(P,)`` or ``(P, dim)``)."""
        p = np.asarray(p, dtype=float)
        if self.geometry.dim == 1:
            (lo, hi), = self.geometry.bounds
            return legendre_1d(self.M, lo, hi, p.reshape(-1))
        p = p.reshape(-1, 2)
        (a0, b0), (a1, b1) = self.geometry.bounds
        V1 = legendre_1d(self.M, a0, b0, p[:, 0])
        V2 = legendre_1d(self.M, a1, b1, p[:, 1])
        return (V1[:, :, None] * V2[:, None, :]).reshape(p.shape[0], -1)

    def eval(self, j: int, p) -> np.ndarray:
        return self.vandermonde(p)[:, j]

    def synthesize(self, coeffs: np.ndarray, p) -> np.ndarray:
        """Evaluate ``sum_j coeffs[j] P_j`` at parameter points (leading axis of coeffs = basis)."""
        return np.tensordot(self.vandermonde(p), coeffs, axes=(1, 0))

    def project(self, f) -> np.ndarray:
        """Coefficients ``<f, P_j>`` computed with the basis quadrature (f takes parameter points)."""
        vals = f(self.quad_points if self.geometry.dim > 1 else self.quad_points[:, 0])
        return self.vandermonde(self.quad_points).T @ (self.quad_weights * vals)

    def gram(self) -> np.ndarray:
        V = self.vandermonde(self.quad_points)
        return V.T @ (self.quad_weights[:, None] * V)


def legendre_orthonormal(M: int, geometry: Geometry) -> SpaceBasis:
    """Orthonormal Legendre basis of degree ``M`` per coordinate with an exact ``(M+1)``-point rule."""
    if int(M) != M or M < 0:
        raise InvalidArgument(f"need M >= 0, got {M}")
    _validate_geometry(geometry)
    pts, wts = tensor_gauss(geometry.bounds, int(M) + 1)
    return SpaceBasis(int(M), geometry, pts, wts)
