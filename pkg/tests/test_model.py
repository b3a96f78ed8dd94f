import math
import warnings

import numpy as np
import pytest

from agespec.errors import InvalidArgument
from agespec.model import (
    ModelSpec,
    gaussian_kernel,
    kernel_normalization_constant,
    make_preset,
    model_from_config,
    mollifier_kernel,
    survival_from_cumulative_mortality,
)
from agespec.quadrature import Interval, clenshaw_curtis

# 1 / int_{-2}^{2} exp(-1/(4 - x^2)) dx, from a 40-digit tanh-sinh quadrature (mpmath), frozen
K_MOLLIFIER = 0.4030226690198875439


def test_example1_survival_and_birth():
    m = make_preset("example1", R=1.0)
    assert m.Pi0(np.array([0.5]))[0] == pytest.approx(0.5)
    x0 = np.zeros(2)
    np.testing.assert_allclose(m.beta(np.array([0.25, 0.75]), x0), [0.0, 8.0])
    assert m.age_breakpoints == (0.5,)
    assert m.separable and m.mu1_is_zero and m.boundary == "dirichlet"


def test_example1_birth_scales_with_log_r():
    m = make_preset("example1", R=0.5)
    assert m.beta(np.array([0.9]), np.zeros(1))[0] == pytest.approx(8 * (1 - math.log(0.5)))


def test_example2_mortality():
    m = make_preset("example2", beta0=8.0)
    a = np.linspace(0, 1, 7)
    np.testing.assert_allclose(m.mu1(a, np.zeros_like(a)), 1.0)
    assert m.beta(np.array([0.75]), np.array([1.0]))[0] == pytest.approx(8.0)
    assert not m.separable


def test_example3_disk_and_kernel():
    m = make_preset("example3")
    assert m.geometry.dim == 2 and m.kernel.ndim == 2
    assert m.kernel(np.zeros((1, 2)))[0] == pytest.approx(1 / math.pi)


def test_neumann_preset_shares_example1_coefficients():
    a = np.linspace(0, 1, 11)
    x = np.zeros_like(a)
    m1, mn = make_preset("example1"), make_preset("neumann1")
    np.testing.assert_array_equal(m1.beta(a, x), mn.beta(a, x))
    assert mn.boundary == "neumann"


@pytest.mark.parametrize("name,params", [
    ("example1", {"R": 0.0}), ("example1", {"R": -1.0}), ("example2", {"beta0": -2.0}),
    ("example3", {"R_domain": 0.0}), ("example1", {"d": 0.0}), ("example1", {"beta0": 8.0}),
    ("nope", {}),
])
def test_invalid_presets(name, params):
    with pytest.raises(InvalidArgument):
        make_preset(name, **params)


def test_kernel_constant_frozen():
    k = kernel_normalization_constant()
    assert k > 0
    assert k == pytest.approx(K_MOLLIFIER, rel=1e-12)


def test_mollifier_unit_mass():
    assert mollifier_kernel().mass() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("ndim", [1, 2])
def test_gaussian_unit_mass(ndim):
    assert gaussian_kernel(ndim).mass() == pytest.approx(1.0, abs=1e-10)


def test_kernels_radially_symmetric(rng):
    x = rng.uniform(-3, 3, 100)
    J = mollifier_kernel()
    np.testing.assert_allclose(J(x), J(-x), atol=1e-14, rtol=0)
    G = gaussian_kernel(2)
    p = rng.uniform(-2, 2, (100, 2))
    np.testing.assert_allclose(G(p), G(-p), atol=1e-14, rtol=0)


def test_birth_survival_integral_by_clenshaw_curtis():
    m = make_preset("example1", R=1.0)
    x0 = np.zeros(1)
    total = 0.0
    for lo, hi in [(0.0, 0.5), (0.5, 1.0)]:
        r = clenshaw_curtis(8, lo, hi)
        a = np.clip(r.nodes, lo + 1e-15, hi - 1e-15)  # one-sided values at the jump
        total += r.weights @ (m.beta(a, np.broadcast_to(x0, a.shape)) * m.Pi0(a))
    assert total == pytest.approx(1.0, abs=1e-13)


def test_neumann_mass_function_in_unit_interval():
    m = make_preset("neumann1")
    J = m.kernel
    from agespec.quadrature import gauss_legendre

    r = gauss_legendre(200, -1.0, 1.0)
    xs = np.linspace(-1, 1, 21)
    c = np.array([r.weights @ J(x - r.nodes) for x in xs])
    assert np.all(c > 0) and np.all(c <= 1.0)


def _custom(**kw):
    base = dict(a_dagger=1.0, beta=lambda a, x: np.ones_like(a), mu1=lambda a, x: np.zeros_like(a),
                Pi0=lambda a: 1.0 - np.asarray(a), kernel=mollifier_kernel(), d=1.0, geometry=Interval(1.0))
    base.update(kw)
    return ModelSpec(**base)


def test_nonpositive_diffusion_is_an_error():
    with pytest.raises(InvalidArgument):
        _custom(d=-1.0)


def test_separable_flag_checked():
    with pytest.raises(InvalidArgument):
        _custom(beta=lambda a, x: 1.0 + np.asarray(x) ** 2, separable=True)


def test_violations_only_warn():
    with pytest.warns(UserWarning, match="negative"):
        _custom(beta=lambda a, x: -np.ones_like(a))
    with pytest.warns(UserWarning, match="survival"):
        _custom(Pi0=lambda a: 1.0 + np.asarray(a))


def test_presets_construct_without_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for name in ("example1", "example2", "example3", "neumann1"):
            make_preset(name)


def test_survival_from_cumulative_mortality():
    Pi = survival_from_cumulative_mortality(lambda a: -np.log1p(-a))
    np.testing.assert_allclose(Pi(np.array([0.0, 0.25, 0.5])), [1.0, 0.75, 0.5])


def test_model_from_config():
    # l > sqrt(2) makes beta = beta0 (2 - x^2) negative near the boundary
    with pytest.warns(UserWarning, match="negative"):
        m = model_from_config({"preset": "example2", "beta0": 10, "l": 2})
    assert m.params == {"beta0": 10.0, "l": 2.0, "d": 1.0}
    with pytest.raises(InvalidArgument):
        model_from_config({"preset": "example9"})


def test_with_params():
    m = make_preset("example1", R=0.7).with_params(l=2.0)
    assert m.params == {"R": 0.7, "l": 2.0, "d": 1.0}
