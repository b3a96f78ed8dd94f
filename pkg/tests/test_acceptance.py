"""Acceptance criteria 1-10, one test each.

Every test records its individual checks with the ``acceptance`` fixture; the
terminal summary prints one PASS/FAIL line per criterion.
"""

import numpy as np
import pytest

from agespec.age import build_age_matrices
from agespec.analysis import Solver, run_bifurcate, run_converge
from agespec.eigen import RESIDUAL_TOL, eig_dense, has_positive_eigenfunction, reconstruct_eigenfunction
from agespec.generator import assemble_separable
from agespec.model import make_preset
from agespec.oracles import verify_decomposition
from agespec.quadrature import clenshaw_curtis, gauss_legendre, lagrange_diff_matrix, legendre_orthonormal, make_age_mesh
from agespec.space import build_space_matrix, nystrom_oracle, space_eigenpairs

GAMMA1 = -1.070249248997922 + 9.438599419667414j
THETA0, THETA1 = 0.584294111974084, 0.062556017866521
R_STAR, GAMMA0_AT_R_STAR = 0.7277628676660066, 0.415705888025916
EX2 = (-0.248872934970194, -0.739612643296491)
EX3 = (-0.508459905995625, -0.827016421828640)
NEUMANN_LAMBDA1 = -0.467278026690667
EPS = np.finfo(float).eps


def _finish(rec):
    assert rec.passed, [label for label, ok in rec.checks if not ok]


def test_criterion_01_example1_age_spectrum(acceptance, example1_age_100):
    rec = acceptance(1, "example 1 age spectrum at N = 100")
    g = example1_age_100[3]
    rec.check(f"|gamma0| = {abs(g[0]):.1e} <= 1e-10", abs(g[0]) <= 1e-10)
    err = abs(g[1] - GAMMA1)
    rec.check(f"|gamma1 - ref| = {err:.1e} <= 1e-8", err <= 1e-8)
    _finish(rec)


def test_criterion_02_example1_space_spectrum(acceptance):
    rec = acceptance(2, "example 1 space spectrum at M = 150 with Nystrom cross-check")
    m = make_preset("example1")
    vals, _ = space_eigenpairs(build_space_matrix(m, legendre_orthonormal(150, m.geometry)))
    rec.check(f"|theta0 - ref| = {abs(vals[0] - THETA0):.1e} <= 1e-8", abs(vals[0] - THETA0) <= 1e-8)
    rec.check(f"|theta1 - ref| = {abs(vals[1] - THETA1):.1e} <= 1e-8", abs(vals[1] - THETA1) <= 1e-8)
    ny = nystrom_oracle(m, 2000, k=2)
    dev = np.abs(ny - vals[:2]).max()
    rec.check(f"Nystrom deviation {dev:.1e} <= 1e-4", dev <= 1e-4)
    _finish(rec)


def test_criterion_03_transcritical_bifurcation(acceptance):
    rec = acceptance(3, "transcritical bifurcation in R at N = M = 100")
    res = run_bifurcate(Solver("example1"), 100, 100, "R", [0.5, 1.0])
    rec.check(f"bisection converged (|lambda0| = {abs(res.lambda0_residual):.1e})", res.converged)
    err_r = abs(res.critical_value - R_STAR)
    rec.check(f"|R* - ref| = {err_r:.2e} <= 1e-7 (R* = {res.critical_value:.16f})", err_r <= 1e-7)
    err_g = abs(res.gamma0 - GAMMA0_AT_R_STAR)
    rec.check(f"|gamma0(R*) - ref| = {err_g:.1e} <= 1e-7", err_g <= 1e-7)
    _finish(rec)


def test_criterion_04_example2_general_assembly(acceptance, example2_50):
    rec = acceptance(4, "example 2 general assembly at N = M = 50")
    model, mesh, basis, _, spec = example2_50
    lam = spec.eigenvalues
    for k in (0, 1):
        err = abs(lam[k] - EX2[k])
        rec.check(f"|lambda{k} - ref| = {err:.1e} <= 1e-5", err <= 1e-5)
    ef0 = reconstruct_eigenfunction(spec.eigenvectors[:, 0], mesh, basis, model.Pi0)
    ef1 = reconstruct_eigenfunction(spec.eigenvectors[:, 1], mesh, basis, model.Pi0)
    rec.check("lambda0 eigenfunction positive", has_positive_eigenfunction(ef0))
    rec.check("lambda1 eigenfunction changes sign", not has_positive_eigenfunction(ef1))
    _finish(rec)


def test_criterion_05_example3_disk(acceptance):
    rec = acceptance(5, "example 3 on the disk at N = M = 40")
    lam = Solver("example3").spectrum(40, 40).eigenvalues
    for k in (0, 1):
        err = abs(lam[k] - EX3[k])
        rec.check(f"|lambda{k} - ref| = {err:.1e} <= 5e-3", err <= 5e-3)
    _finish(rec)


def test_criterion_06_neumann(acceptance):
    rec = acceptance(6, "Neumann operator")
    m = make_preset("neumann1")
    S = build_space_matrix(m, legendre_orthonormal(10, m.geometry))
    K = build_age_matrices(m, make_age_mesh(10, 1.0, [0.5])).K
    lam = eig_dense(assemble_separable(K, S, m.d).B).eigenvalues
    rec.check(f"|lambda0| = {abs(lam[0]):.1e} <= 1e-10 at N = M = 10", abs(lam[0]) <= 1e-10)
    vals, vecs = space_eigenpairs(S)
    x = np.linspace(-1, 1, 101)
    f = S.basis.synthesize(vecs[:, 0], x)
    spread = np.ptp(f) / np.abs(f).max()
    rec.check(f"leading space eigenfunction constant (relative spread {spread:.1e})",
              abs(vals[0]) <= 1e-12 and spread <= 1e-10)
    lam100 = Solver("neumann1").spectrum(100, 100).eigenvalues
    err = abs(lam100[1] - NEUMANN_LAMBDA1)
    rec.check(f"|lambda1 - ref| = {err:.1e} <= 1e-6 at N = M = 100", err <= 1e-6)
    _finish(rec)


def _decay_ok(errors, floor):
    # x10 per doubling until the roundoff floor, which must be reached by the last size
    ok = errors[-1] <= floor
    for e_prev, e_next in zip(errors[:-1], errors[1:]):
        if e_next > floor:
            ok &= e_next <= e_prev / 10
    return bool(ok)


def test_criterion_07_spectral_convergence(acceptance):
    rec = acceptance(7, "spectral convergence of gamma1 and theta0")
    s = Solver("example1")
    sizes = (10, 20, 40, 80)
    rows = run_converge(s, [(n, 2) for n in sizes], (500, 2), track=[1], problem="age")
    eg = [r.abs_error for r in rows]
    floor_g = 1e-11 * max(1.0, abs(rows[0].target_value))
    rec.check("gamma1 errors " + ", ".join(f"{e:.1e}" for e in eg) + f" (floor {floor_g:.0e})",
              _decay_ok(eg, floor_g))
    rows = run_converge(s, [(2, n) for n in sizes], (2, 200), track=[0], problem="space")
    et = [r.abs_error for r in rows]
    floor_t = 1e-11 * max(1.0, abs(rows[0].target_value))
    rec.check("theta0 errors " + ", ".join(f"{e:.1e}" for e in et) + f" (floor {floor_t:.0e})",
              _decay_ok(et, floor_t))
    rec.check("first doubling gains a factor >= 10 for both", eg[1] <= eg[0] / 10 and et[1] <= et[0] / 10)
    _finish(rec)


def test_criterion_08_route_equivalence(acceptance):
    rec = acceptance(8, "route equivalence at N = M = 30")
    for preset in ("example1", "neumann1"):
        rep = verify_decomposition(preset, 30, 30)
        rec.check(f"{preset}: distance {rep.value:.1e} <= 1e-8", rep.value <= 1e-8)
    _finish(rec)


def test_criterion_09_monotonicity(acceptance):
    rec = acceptance(9, "lambda0 monotone in d and l at R = 0.7")
    s = Solver("example1", {"R": 0.7})
    ds = np.linspace(0.25, 3.0, 6)
    ls = np.linspace(0.25, 3.0, 6)
    L = np.array([[s.lambda0(40, 40, d=d, l=l) for l in ls] for d in ds])
    rec.check("strictly decreasing in d", np.all(np.diff(L, axis=0) < 0))
    rec.check("strictly increasing in l", np.all(np.diff(L, axis=1) > 0))
    _finish(rec)


def test_criterion_10_structural_invariants(acceptance, rng):
    rec = acceptance(10, "structural invariants at N, M <= 200")
    # quadrature exactness
    gl, cc = gauss_legendre(100, 0, 1), clenshaw_curtis(201, 0, 1)
    rec.check("GL(100) exact to degree 199",
              all(abs(gl.integrate(lambda x: x**p) - 1 / (p + 1)) <= 1e-13 for p in range(0, 200, 7)))
    rec.check("CC(201) exact to degree 200",
              all(abs(cc.integrate(lambda x: x**p) - 1 / (p + 1)) <= 1e-13 for p in range(0, 201, 7)))
    # differentiation matrix
    ok = True
    for N in (50, 100, 200):
        mesh = make_age_mesh(N, 1.0, [0.5])
        dm = lagrange_diff_matrix(mesh)
        p = np.polynomial.Chebyshev(rng.standard_normal(N + 1), domain=[0, 1])
        p = p - p(0.0)
        a = mesh.active_nodes
        scale = np.abs(p(np.linspace(0, 1, 2001))).max()
        ok &= np.abs(dm.D @ p(a) - p.deriv()(a)).max() <= 1e-12 * N**2 * 4 * scale
    rec.check("D exact on polynomials up to N = 200 (roundoff bound)", ok)
    # basis and space operator
    m = make_preset("example1")
    basis = legendre_orthonormal(200, m.geometry)
    rec.check("Legendre Gram = I at M = 200", np.abs(basis.gram() - np.eye(201)).max() <= 1e-12)
    S = build_space_matrix(m, basis)
    vals, _ = space_eigenpairs(S)
    rec.check(f"Jm symmetric (asymmetry {S.asymmetry:.1e})", S.symmetric and S.asymmetry <= 1e-12)
    rec.check(f"theta < 1 at M = 200 (max {vals[0]:.6f})", vals[0] < 1 and vals[-1] > -1)
    # conjugate closure and residuals of the age factor at N = 200
    K = build_age_matrices(m, make_age_mesh(200, 1.0, [0.5])).K
    spec = eig_dense(K, want_vectors=10)
    g = spec.eigenvalues
    closed = all(np.min(np.abs(g - np.conj(z))) <= 1e-8 * max(1.0, abs(z)) for z in g)
    rec.check("age spectrum closed under conjugation at N = 200", closed)
    rec.check(f"age eigenvector residuals {spec.residuals.max():.1e} <= {RESIDUAL_TOL:.0e}",
              spec.residuals.max() <= RESIDUAL_TOL)
    # residual contract on an assembled generator
    G = assemble_separable(build_age_matrices(m, make_age_mesh(20, 1.0, [0.5])).K,
                           build_space_matrix(m, legendre_orthonormal(20, m.geometry)), m.d)
    specB = eig_dense(G.B, want_vectors=10)
    rec.check(f"generator residuals {specB.residuals.max():.1e} <= {RESIDUAL_TOL:.0e}",
              specB.residuals.max() <= RESIDUAL_TOL)
    _finish(rec)
