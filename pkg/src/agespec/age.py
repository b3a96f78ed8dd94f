"""Age part of the discretised generator.

The collocated age operator is ``K = -D + H - W`` where, for the Lagrange
basis ``l_h`` on the age mesh,

* ``H[i, h] = int_0^{a_dagger} beta(a, x) Pi0(a) l_h'(a) da`` (same for every row),
* ``W[i, h] = int_0^{a_i} mu1(a, x) l_h'(a) da``.

``H`` uses piecewise Clenshaw-Curtis split at the mesh breakpoints. ``W`` uses
rows of ``D^{-1}`` while no coefficient breakpoint lies in ``(0, a_i)`` and
piecewise Clenshaw-Curtis on ``[0, a_i]`` otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .eigen import eig_dense
from .errors import InvalidArgument, QuadratureNonconvergence
from .model import ModelSpec
from .quadrature import AgeMesh, DiffIntMatrices, clenshaw_curtis, lagrange_diff_matrix

__all__ = [
    "AgeOperatorMatrices",
    "build_age_matrices",
    "age_integrals",
    "age_eigenvalues",
    "characteristic_value",
]

CC_TOL = 1e-12
CC_CAP = 2**12


@dataclass(frozen=True, eq=False)
class AgeOperatorMatrices:
    D: np.ndarray
    H: np.ndarray
    W: np.ndarray
    K: np.ndarray
    D_inv: np.ndarray


def _inside(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # one-sided limits at piece ends: coefficients may jump at breakpoints
    delta = 16 * np.finfo(float).eps * (hi - lo)
    return np.clip(a, lo + delta, hi - delta)


class _AgeIntegrator:
    """Quadrature data for ``H`` and ``W`` at a fixed Clenshaw-Curtis size ``n`` per piece."""

    def __init__(self, model: ModelSpec, mesh: AgeMesh, dm: DiffIntMatrices, n: int):
        self.model, self.mesh, self.dm = model, mesh, dm
        bps = mesh.breakpoints
        pts, wts, Ls = [], [], []
        for k in range(mesh.n_pieces):
            rule = clenshaw_curtis(n, bps[k], bps[k + 1])
            pts.append(_inside(rule.nodes, bps[k], bps[k + 1]))
            wts.append(rule.weights * model.Pi0(rule.nodes))
            Ls.append(mesh.lagrange(rule.nodes, derivative=True, piece=k))
        self.h_pts = np.concatenate(pts)
        self.h_wts = np.concatenate(wts)
        self.h_L = np.vstack(Ls)

        a = mesh.active_nodes
        first_jump = model.age_breakpoints[0] if model.age_breakpoints else np.inf
        self.dinv_rows = np.flatnonzero(a <= first_jump)
        self.cc_rows = np.flatnonzero(a > first_jump)
        owner = mesh.piece_of(a)
        # left limits at breakpoint nodes (their derivative rows come from the left piece)
        self.node_pts = np.array([_inside(np.array([ai]), bps[k], bps[k + 1])[0] for ai, k in zip(a, owner)])
        self.segments = []  # (row, piece, nodes, weights) for the rows integrated by CC
        if model.mu1_is_zero:
            return
        for i in self.cc_rows:
            ai = a[i]
            for k in range(mesh.n_pieces):
                lo, hi = bps[k], min(bps[k + 1], ai)
                if hi <= lo:
                    break
                rule = clenshaw_curtis(n, lo, hi)
                self.segments.append((i, k, rule.nodes, rule.weights))

    def H(self, xs: np.ndarray) -> np.ndarray:
        B = self.model.eval_age_x(self.model.beta, self.h_pts, xs)  # (pts, nx)
        return (B * self.h_wts[:, None]).T @ self.h_L

    def W(self, xs: np.ndarray) -> np.ndarray:
        nx = xs.shape[0]
        n = self.mesh.size
        out = np.zeros((nx, n, n))
        if self.model.mu1_is_zero:
            return out
        D, Dinv = self.dm.D, self.dm.D_inv
        if self.dinv_rows.size:
            U = self.model.eval_age_x(self.model.mu1, self.node_pts, xs)  # (n, nx)
            # W[x, i, h] = sum_m Dinv[i, m] mu1(a_m, x) D[m, h]
            out[:, self.dinv_rows, :] = np.einsum("im,mx,mh->xih", Dinv[self.dinv_rows], U, D, optimize=True)
        bps = self.mesh.breakpoints
        for i, k, nodes, wts in self.segments:
            U = self.model.eval_age_x(self.model.mu1, _inside(nodes, bps[k], bps[k + 1]), xs)
            out[:, i, :] += (U * wts[:, None]).T @ self.mesh.lagrange(nodes, derivative=True, piece=k)
        return out


def age_integrals(model: ModelSpec, mesh: AgeMesh, xs: np.ndarray, dm: DiffIntMatrices | None = None):
    """``H`` rows ``(nx, n)`` and ``W`` matrices ``(nx, n, n)`` at the space points ``xs``.

    The Clenshaw-Curtis size starts at ``2N + 8`` per piece and doubles until
    successive results agree to ``max(1e-12, eps N^2)`` relative to their
    magnitude (the roundoff floor of the Lagrange derivatives).
    """
    _check_mesh(model, mesh)
    dm = lagrange_diff_matrix(mesh) if dm is None else dm
    xs = np.asarray(xs, dtype=float)
    n = 2 * mesh.N + 8
    # the basis derivatives carry roundoff of order eps * N^2
    tol = max(CC_TOL, np.finfo(float).eps * mesh.N**2)
    integ = _AgeIntegrator(model, mesh, dm, n)
    H, W = integ.H(xs), integ.W(xs)
    while True:
        n2 = 2 * n - 1  # nested Chebyshev extreme points
        integ = _AgeIntegrator(model, mesh, dm, n2)
        H2, W2 = integ.H(xs), integ.W(xs)
        scale = max(1.0, np.abs(H2).max(initial=0.0), np.abs(W2).max(initial=0.0))
        change = max(np.abs(H2 - H).max(initial=0.0), np.abs(W2 - W).max(initial=0.0))
        if change <= tol * scale:
            return H2, W2
        if n2 >= CC_CAP:
            raise QuadratureNonconvergence(
                f"age integrals not converged at {n2} Clenshaw-Curtis points (change {change:.2e})"
            )
        n, H, W = n2, H2, W2


def _check_mesh(model: ModelSpec, mesh: AgeMesh) -> None:
    if abs(mesh.a_dagger - model.a_dagger) > 1e-14 * model.a_dagger:
        raise InvalidArgument("mesh and model have different maximum ages")
    missing = [b for b in model.age_breakpoints if not np.any(np.isclose(mesh.breakpoints, b, rtol=0, atol=1e-14))]
    if missing:
        raise InvalidArgument(f"mesh lacks the coefficient breakpoints {missing}")


def build_age_matrices(model: ModelSpec, mesh: AgeMesh, x=None) -> AgeOperatorMatrices:
    """Age matrices at one space point ``x`` (ignored, and optional, for separable models)."""
    if x is None:
        if not model.separable:
            raise InvalidArgument("a space point is required for non-separable models")
        xs = model.reference_point()
    else:
        xs = np.asarray(x, dtype=float).reshape(1, -1) if model.geometry.dim > 1 else np.atleast_1d(
            np.asarray(x, dtype=float)
        )[:1]
    dm = lagrange_diff_matrix(mesh)
    Hrow, W = age_integrals(model, mesh, xs, dm)
    H = np.tile(Hrow[0], (mesh.size, 1))
    K = -dm.D + H - W[0]
    return AgeOperatorMatrices(dm.D, H, W[0], K, dm.D_inv)


def age_eigenvalues(K: np.ndarray) -> np.ndarray:
    """Eigenvalues of the age matrix, descending real part (ties: ascending ``|Im|``)."""
    return eig_dense(K).eigenvalues


def characteristic_value(model: ModelSpec, gamma: complex) -> complex:
    """``int_0^{a_dagger} beta(a) Pi0(a) exp(-int_0^a mu1 - gamma a) da`` by adaptive quadrature.

    ``gamma`` is an eigenvalue of the age operator exactly when this equals one.
    """
    if not model.separable:
        raise InvalidArgument("the characteristic function needs age-only coefficients")
    x0 = model.reference_point()

    def coef(f, a):
        return float(f(np.array([a]), x0)[0])

    def cum_mu1(a):
        if model.mu1_is_zero or a == 0.0:
            return 0.0
        return integrate.quad(lambda s: coef(model.mu1, s), 0.0, a, limit=200,
                              points=[b for b in model.age_breakpoints if b < a] or None)[0]

    def integrand(a):
        return coef(model.beta, a) * float(model.Pi0(np.array([a]))[0]) * np.exp(-cum_mu1(a) - gamma * a)

    edges = (0.0, *model.age_breakpoints, model.a_dagger)
    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        opts = dict(limit=400, epsabs=1e-14, epsrel=1e-13)
        lo_i, hi_i = _inside(np.array([lo, hi]), lo, hi)
        with warnings.catch_warnings():
            # the error estimate is checked below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            re, e1 = integrate.quad(lambda a: integrand(a).real, lo_i, hi_i, **opts)
            im, e2 = (0.0, 0.0) if complex(gamma).imag == 0 else integrate.quad(
                lambda a: integrand(a).imag, lo_i, hi_i, **opts)
        if max(e1, e2) > 1e-8 * max(1.0, abs(re), abs(im)):
            raise QuadratureNonconvergence(f"characteristic integral error estimate {max(e1, e2):.2e}")
        total += re + 1j * im
    return complex(total)
