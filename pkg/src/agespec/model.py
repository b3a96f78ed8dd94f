"""Model ingredients: birth and mortality rates, survival, dispersal kernel,
domain and boundary type, plus the built-in presets.

Coefficient callbacks are vectorised and must be pure: ``beta(a, x)`` and
``mu1(a, x)`` receive ``a`` of shape ``(P,)`` and ``x`` of shape ``(P,)`` on
an interval or ``(P, 2)`` (Cartesian coordinates) on planar domains, and return
an array of shape ``(P,)``. ``Pi0(a)`` is a function of age alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, QuadratureNonconvergence
from .quadrature import Disk, Geometry, Interval, gauss_legendre

__all__ = [
    "Kernel",
    "ModelSpec",
    "PRESETS",
    "make_preset",
    "kernel_normalization_constant",
    "mollifier_kernel",
    "gaussian_kernel",
    "survival_from_cumulative_mortality",
    "model_from_config",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True, eq=False)
class Kernel:
    """Radial dispersal kernel ``J(x) = profile(|x|)`` in ``ndim`` dimensions.

    ``support`` is the radius outside which the profile vanishes (``None`` for
    kernels with unbounded support).
    """

    profile: Callable[[np.ndarray], np.ndarray]
    ndim: int
    support: float | None = None
    name: str = "custom"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.ndim == 1 else np.sqrt((x * x).sum(axis=-1))
        return self.profile(r)

    def of_distance(self, r) -> np.ndarray:
        return self.profile(np.asarray(r, dtype=float))

    def mass(self) -> float:
        """Integral of ``J`` over the whole space (QUADPACK, radial form)."""
        upper = self.support if self.support is not None else np.inf
        f = (lambda r: 2.0 * float(self.profile(np.array([r]))[0])) if self.ndim == 1 else (
            lambda r: 2.0 * math.pi * r * float(self.profile(np.array([r]))[0])
        )
        val, _ = integrate.quad(f, 0.0, upper, limit=200, epsabs=1e-13, epsrel=1e-12)
        return val


def _mollifier_raw(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 2.0
    out[inside] = np.exp(-1.0 / (4.0 - r[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def kernel_normalization_constant(tol: float = 1e-12, cap: int = 4096) -> float:
    """``k = 1 / int_{-2}^{2} exp(-1/(4 - x^2)) dx`` by Gauss-Legendre with doubling."""
    n = 32
    prev = gauss_legendre(n, -2.0, 2.0).integrate(_mollifier_raw)
    while True:
        n *= 2
        cur = gauss_legendre(n, -2.0, 2.0).integrate(_mollifier_raw)
        change = abs(cur - prev)
        if change <= tol * abs(cur):
            return 1.0 / cur
        if n >= cap:
            if change > 1e-10 * abs(cur):
                raise QuadratureNonconvergence(f"mollifier mass not converged: change {change:.3e}")
            return 1.0 / cur
        prev = cur


def mollifier_kernel() -> Kernel:
    """``J(x) = k exp(-1/(4 - x^2))`` on ``(-2, 2)``, zero elsewhere (one dimension)."""
    k = kernel_normalization_constant()
    return Kernel(lambda r: k * _mollifier_raw(r), 1, 2.0, "mollifier")


def gaussian_kernel(ndim: int) -> Kernel:
    """Unit-mass Gaussian ``pi^{-n/2} exp(-|x|^2)``."""
    c = math.pi ** (-0.5 * ndim)
    return Kernel(lambda r: c * np.exp(-np.asarray(r) ** 2), ndim, None, f"gaussian{ndim}d")


def survival_from_cumulative_mortality(cum_mu0: Callable[[np.ndarray], np.ndarray]):
    """Survival probability ``exp(-int_0^a mu0)`` from a closed-form cumulative mortality."""
    return lambda a: np.exp(-cum_mu0(np.asarray(a, dtype=float)))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    a_dagger: float
    beta: Callable
    mu1: Callable
    Pi0: Callable
    kernel: Kernel
    d: float
    geometry: Geometry
    boundary: str = DIRICHLET
    age_breakpoints: tuple[float, ...] = ()
    separable: bool = False
    mu1_is_zero: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.d) and self.d > 0):
            raise InvalidArgument(f"diffusion rate d must be positive, got {self.d}")
        if not self.a_dagger > 0:
            raise InvalidArgument(f"a_dagger must be positive, got {self.a_dagger}")
        if self.boundary not in (DIRICHLET, NEUMANN):
            raise InvalidArgument(f"boundary must be 'dirichlet' or 'neumann', got {self.boundary!r}")
        if self.kernel.ndim != self.geometry.dim:
            raise InvalidArgument("kernel dimension does not match the domain")
        bps = tuple(sorted(float(b) for b in self.age_breakpoints))
        if any(not (0.0 < b < self.a_dagger) for b in bps):
            raise InvalidArgument(f"age breakpoints must lie in (0, a_dagger), got {bps}")
        object.__setattr__(self, "age_breakpoints", bps)
        self._check_assumptions()

    # -- sampling helpers -------------------------------------------------

    def sample_space_points(self, n: int = 7) -> np.ndarray:
        """Physical sample points of the domain (including its boundary)."""
        g = self.geometry
        if g.dim == 1:
            (lo, hi), = g.bounds
            return np.linspace(lo, hi, n)
        (a0, b0), (a1, b1) = g.bounds
        P0, P1 = np.meshgrid(np.linspace(a0, b0, n), np.linspace(a1, b1, n), indexing="ij")
        return g.to_physical(np.column_stack([P0.ravel(), P1.ravel()]))

    def reference_point(self) -> np.ndarray:
        """A point of the closed domain used when coefficients are age-only."""
        return np.zeros(1) if self.geometry.dim == 1 else np.zeros((1, 2))

    def eval_age_x(self, f: Callable, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate ``f`` on the tensor grid ``a x x``; result shape ``(len(a), n_x)``."""
        a = np.asarray(a, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float)
        nx = x.shape[0]
        A = np.repeat(a, nx)
        X = np.tile(x, (a.size, 1)) if x.ndim == 2 else np.tile(x, a.size)
        return np.broadcast_to(f(A, X), A.shape).reshape(a.size, nx)

    def _check_assumptions(self) -> None:
        a = np.linspace(0.0, self.a_dagger, 1000)
        p = np.asarray(self.Pi0(a), dtype=float)
        if abs(p[0] - 1.0) > 1e-12 or np.any(np.diff(p) > 1e-14) or np.any(p < 0) or np.any(p > 1):
            warnings.warn("Pi0 is not a survival probability on the sample grid", stacklevel=3)
        aa = np.linspace(0.0, self.a_dagger, 41)
        xs = self.sample_space_points()
        B = self.eval_age_x(self.beta, aa, xs)
        U = self.eval_age_x(self.mu1, aa, xs)
        if np.any(B < 0):
            warnings.warn("beta is negative at sampled points", stacklevel=3)
        if np.any(U < 0):
            warnings.warn("mu1 is negative at sampled points", stacklevel=3)
        if self.separable:
            spread = max(np.ptp(B, axis=1).max(), np.ptp(U, axis=1).max())
            if spread > 1e-12:
                raise InvalidArgument(f"separable=True but coefficients vary in x (spread {spread:.2e})")
        if float(self.kernel(np.zeros((1, self.kernel.ndim)) if self.kernel.ndim > 1 else np.zeros(1))[0]) <= 0:
            warnings.warn("kernel must satisfy J(0) > 0", stacklevel=3)
        mass = self.kernel.mass()
        if abs(mass - 1.0) > 1e-8:
            warnings.warn(f"kernel mass is {mass:.12g}, not 1", stacklevel=3)

    def with_params(self, **changes) -> "ModelSpec":
        """Rebuild a preset with some parameters replaced (presets only)."""
        if self.name not in PRESETS:
            raise InvalidArgument("with_params is only available for preset models")
        return make_preset(self.name, **{**self.params, **changes})


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _indicator_half(a):
    return (np.asarray(a) >= 0.5).astype(float)


def _survival_linear(a):
    return np.clip(1.0 - np.asarray(a, dtype=float), 0.0, 1.0)


def _zero(a, x):
    return np.zeros(np.shape(a))


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidArgument(f"{name} must be positive, got {value}")
    return float(value)


def _example1(R=1.0, l=1.0, d=1.0, boundary=DIRICHLET, name="example1"):
    R, l, d = _positive("R", R), _positive("l", l), _positive("d", d)
    scale = 8.0 * (1.0 - math.log(R))
    return ModelSpec(
        a_dagger=1.0,
        beta=lambda a, x: scale * _indicator_half(a),
        mu1=_zero,
        Pi0=_survival_linear,
        kernel=mollifier_kernel(),
        d=d,
        geometry=Interval(l),
        boundary=boundary,
        age_breakpoints=(0.5,),
        separable=True,
        mu1_is_zero=True,
        name=name,
        params={"R": R, "l": l, "d": d},
    )


def _example2(beta0=8.0, l=1.0, d=1.0):
    beta0, l, d = _positive("beta0", beta0), _positive("l", l), _positive("d", d)
    return ModelSpec(
        a_dagger=1.0,
        beta=lambda a, x: beta0 * _indicator_half(a) * (2.0 - np.asarray(x) ** 2),
        mu1=lambda a, x: np.broadcast_to(1.0 / (1.0 + np.asarray(x) ** 2), np.shape(a)),
        Pi0=_survival_linear,
        kernel=gaussian_kernel(1),
        d=d,
        geometry=Interval(l),
        boundary=DIRICHLET,
        age_breakpoints=(0.5,),
        separable=False,
        name="example2",
        params={"beta0": beta0, "l": l, "d": d},
    )


def _example3(beta0=8.0, R_domain=1.0, d=1.0):
    beta0, Rd, d = _positive("beta0", beta0), _positive("R_domain", R_domain), _positive("d", d)
    return ModelSpec(
        a_dagger=1.0,
        beta=lambda a, x: beta0 * _indicator_half(a),
        mu1=_zero,
        Pi0=_survival_linear,
        kernel=gaussian_kernel(2),
        d=d,
        geometry=Disk(Rd),
        boundary=DIRICHLET,
        age_breakpoints=(0.5,),
        separable=True,
        mu1_is_zero=True,
        name="example3",
        params={"beta0": beta0, "R_domain": Rd, "d": d},
    )


def _neumann1(R=1.0, l=1.0, d=1.0):
    return _example1(R, l, d, boundary=NEUMANN, name="neumann1")


PRESETS: dict[str, Callable[..., ModelSpec]] = {
    "example1": _example1,
    "example2": _example2,
    "example3": _example3,
    "neumann1": _neumann1,
}

PRESET_PARAMS = {
    "example1": ("R", "l", "d"),
    "example2": ("beta0", "l", "d"),
    "example3": ("beta0", "R_domain", "d"),
    "neumann1": ("R", "l", "d"),
}


def make_preset(name: str, **params) -> ModelSpec:
    """Build one of the presets ``example1``, ``example2``, ``example3``, ``neumann1``.

    Unknown parameter names raise :class:`InvalidArgument`; omitted ones take
    the defaults ``R = 1``, ``beta0 = 8``, ``l = d = R_domain = 1``.
    """
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    allowed = PRESET_PARAMS[name]
    extra = set(params) - set(allowed)
    if extra:
        raise InvalidArgument(f"preset {name!r} takes parameters {allowed}, got {sorted(extra)}")
    return PRESETS[name](**params)


def model_from_config(cfg: dict) -> ModelSpec:
    """Build a preset from a config mapping (``preset`` plus its numeric keys)."""
    name = cfg.get("preset")
    if name not in PRESETS:
        raise InvalidArgument(f"config key 'preset' must be one of {sorted(PRESETS)}, got {name!r}")
    params = {k: float(cfg[k]) for k in PRESET_PARAMS[name] if k in cfg}
    return make_preset(name, **params)

