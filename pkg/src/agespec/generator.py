"""Assembly of the discretised generator ``B_{N,M}``.

Unknowns are ordered age-major: the coefficient of ``l_i(a) P_j(x)`` sits at
``i * dim_space + j`` (``i`` over the active age nodes, ``j`` over the space
basis). In this ordering the separable generator is
``kron(K, I) + kron(I, d (Jm - I))``, a permutation of the space-major
Kronecker form; both have the same spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .age import age_integrals
from .errors import InvalidArgument
from .model import NEUMANN, ModelSpec
from .quadrature import AgeMesh, SpaceBasis, lagrange_diff_matrix, tensor_gauss
from .space import SpaceOperatorMatrix, build_space_matrix, default_quad_order
from .eigen import sort_spectrum

__all__ = ["GeneratorMatrix", "assemble_separable", "spectrum_sum", "assemble_general"]

SEPARABLE, GENERAL, NEUMANN_KIND = "separable", "general", "neumann"


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    B: np.ndarray
    n_age: int
    dim_space: int
    kind: str
    K: np.ndarray | None = None  # age matrix (separable assembly)
    space: SpaceOperatorMatrix | None = None

    @property
    def size(self) -> int:
        return self.n_age * self.dim_space

    def index(self, i: int, j: int) -> int:
        """Position of the unknown for age node ``i`` and space basis function ``j``."""
        return i * self.dim_space + j


def _space_part(S: SpaceOperatorMatrix, d: float) -> np.ndarray:
    # Dirichlet: d (Jm - I); Neumann: d (Jm - Cm)
    return d * (S.operator - S.shift * np.eye(S.Jm.shape[0]))


def assemble_separable(K: np.ndarray, S: SpaceOperatorMatrix, d: float) -> GeneratorMatrix:
    """``B = kron(K, I) + kron(I, d (Jm - I))`` (``Jm - Cm`` for Neumann) in age-major order."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidArgument(f"age matrix must be square, got {K.shape}")
    s = S.Jm.shape[0]
    n = K.shape[0]
    B = np.kron(K, np.eye(s)) + np.kron(np.eye(n), _space_part(S, d))
    return GeneratorMatrix(B, n, s, NEUMANN_KIND if S.neumann else SEPARABLE, K, S)


def spectrum_sum(gammas, thetas, d: float = 1.0, shift: float = 1.0) -> np.ndarray:
    """All sums ``gamma + d (theta - shift)``, sorted rightmost first.

    With ``d = 1`` and ``shift = 1`` this is ``{gamma_i + theta_j - 1}``; Neumann
    models use the eigenvalues of ``Jm - Cm`` with ``shift = 0``.
    """
    g = np.asarray(gammas, dtype=complex).ravel()
    t = np.asarray(thetas, dtype=float).ravel()
    return sort_spectrum((g[:, None] + d * (t[None, :] - shift)).ravel())


def assemble_general(model: ModelSpec, mesh: AgeMesh, basis: SpaceBasis, quad_order: int | None = None,
                     space: SpaceOperatorMatrix | None = None) -> GeneratorMatrix:
    """Generator for arbitrary (space-dependent) coefficients.

    The blocks ``H_{N,M}`` and ``W_{N,M}`` are Gauss-Legendre integrals over
    ``Omega`` of ``P_j P_k`` times the age integrals evaluated at each outer
    quadrature point; those are computed once per point for all ``(j, k)``.
    """
    q = default_quad_order(basis.M) if quad_order is None else int(quad_order)
    S = build_space_matrix(model, basis, q) if space is None else space
    if S.basis.dim != basis.dim:
        raise InvalidArgument("space matrix and basis have different sizes")
    g = basis.geometry
    pts, wts = tensor_gauss(g.bounds, q)
    if g.dim == 1:
        pts = pts[:, 0]
    dm = lagrange_diff_matrix(mesh)
    H, W = age_integrals(model, mesh, g.to_physical(pts), dm)  # (nq, n), (nq, n, n)
    V = basis.vandermonde(pts)
    s, n = basis.dim, mesh.size
    G = (wts[:, None, None] * V[:, :, None] * V[:, None, :]).reshape(len(wts), s * s)  # (nq, s*s)

    B = np.kron(-dm.D, np.eye(s)) + np.kron(np.eye(n), _space_part(S, model.d))
    for i in range(n):
        T = (H - W[:, i, :]).T @ G  # (h, j*k)
        B[i * s:(i + 1) * s, :] += T.reshape(n, s, s).transpose(1, 0, 2).reshape(s, n * s)
    kind = NEUMANN_KIND if model.boundary == NEUMANN else GENERAL
    return GeneratorMatrix(B, n, s, kind, None, S)
