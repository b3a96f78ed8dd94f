import numpy as np
import pytest

from agespec.age import build_age_matrices
from agespec.eigen import eig_dense
from agespec.errors import InvalidArgument
from agespec.generator import assemble_general, assemble_separable, spectrum_sum
from agespec.model import make_preset
from agespec.oracles import hausdorff_distance
from agespec.quadrature import legendre_orthonormal, make_age_mesh
from agespec.space import SpaceOperatorMatrix, build_space_matrix, space_eigenpairs

EX2_LAMBDA0 = -0.248872934970194
EX2_LAMBDA1 = -0.739612643296491


def _factors(name, N, M, **params):
    m = make_preset(name, **params)
    mesh = make_age_mesh(N, 1.0, [0.5])
    basis = legendre_orthonormal(M, m.geometry)
    am = build_age_matrices(m, mesh)
    S = build_space_matrix(m, basis)
    return m, mesh, basis, am, S


def test_zero_diffusion_repeats_age_spectrum():
    _, _, _, am, S = _factors("example1", 6, 3)
    G = assemble_separable(am.K, S, d=0.0)
    s = S.Jm.shape[0]
    np.testing.assert_allclose(G.B, np.kron(am.K, np.eye(s)), atol=0)
    gam = eig_dense(am.K).eigenvalues
    lam = eig_dense(G.B).eigenvalues
    # every age eigenvalue appears s times
    assert hausdorff_distance(lam, gam) <= 1e-8
    for z in gam:
        assert np.count_nonzero(np.abs(lam - z) <= 1e-8 * max(1.0, abs(z))) == s


def test_identity_space_and_zero_age_gives_zero():
    basis = legendre_orthonormal(3, make_preset("example1").geometry)
    S = SpaceOperatorMatrix(np.eye(4), None, basis, 8, 0.0, True)
    G = assemble_separable(np.zeros((5, 5)), S, d=2.0)
    np.testing.assert_array_equal(G.B, 0.0)
    assert G.size == 20 and G.index(2, 3) == 11


def test_assemble_rejects_non_square():
    _, _, _, _, S = _factors("example1", 2, 2)
    with pytest.raises(InvalidArgument):
        assemble_separable(np.zeros((3, 4)), S, 1.0)


def test_spectrum_sum_examples():
    np.testing.assert_allclose(spectrum_sum([0.0], [0.5]), [-0.5])
    out = spectrum_sum([1.0, 1j], [0.5, 0.25], d=2.0)
    np.testing.assert_allclose(out, [0.0, -0.5, -1 + 1j, -1.5 + 1j])
    np.testing.assert_allclose(spectrum_sum([0.0], [-0.25, 0.0], shift=0.0), [0.0, -0.25])


@pytest.mark.parametrize("NM", [20, 40])
def test_kronecker_and_sum_routes_agree(NM):
    m, _, _, am, S = _factors("example1", NM, NM)
    lam = eig_dense(assemble_separable(am.K, S, m.d).B).eigenvalues[:50]
    sums = spectrum_sum(eig_dense(am.K).eigenvalues, space_eigenpairs(S)[0], m.d, S.shift)
    np.testing.assert_allclose(lam, sums[:50], atol=1e-8)


def test_general_assembly_matches_separable():
    m, mesh, basis, am, S = _factors("example1", 8, 6)
    Gs = assemble_separable(am.K, S, m.d)
    Gg = assemble_general(m, mesh, basis, space=S)
    assert np.abs(Gs.B - Gg.B).max() <= 1e-12
    ls = eig_dense(Gs.B).eigenvalues[:20]
    lg = eig_dense(Gg.B).eigenvalues[:20]
    assert hausdorff_distance(ls, lg) <= 1e-9


def test_general_assembly_matches_separable_neumann():
    m, mesh, basis, am, S = _factors("neumann1", 6, 5)
    Gs = assemble_separable(am.K, S, m.d)
    Gg = assemble_general(m, mesh, basis, space=S)
    assert Gs.kind == Gg.kind == "neumann"
    assert np.abs(Gs.B - Gg.B).max() <= 1e-12


def test_general_block_structure_for_space_dependent_model():
    # with beta = mu1 = 0 the generator would be block diagonal in space; here the
    # age-space coupling fills the blocks but the space-part blocks stay symmetric
    m = make_preset("example2")
    mesh = make_age_mesh(4, 1.0, [0.5])
    basis = legendre_orthonormal(3, m.geometry)
    G = assemble_general(m, mesh, basis)
    s = basis.dim
    for i in range(mesh.size):
        for h in range(mesh.size):
            blk = G.B[i * s:(i + 1) * s, h * s:(h + 1) * s]
            np.testing.assert_allclose(blk, blk.T, atol=1e-12)


def test_example2_principal_values(example2_50):
    spec = example2_50[4]
    lam = spec.eigenvalues
    assert abs(lam[0] - EX2_LAMBDA0) <= 1e-5
    assert abs(lam[1] - EX2_LAMBDA1) <= 1e-5
    assert lam[0].imag == 0.0
