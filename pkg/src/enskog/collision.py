"""Hard-sphere collision geometry, collision factors and the gain/loss integrals.

A distribution ``f`` is anything callable as ``f(t, x, v)`` with ``x`` and
``v`` broadcastable arrays of shape ``(..., 3)``; gridded fields
(:class:`~enskog.weighted.DistributionField`) additionally provide an exact
``density`` and a bounding box used by the strict stencil mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, OutOfDomain, PoleProximity
from .forces import ForceField, PhaseState
from .quadrature import (
    AXIS_EPS, EstimateWithError, MeanAccumulator, QuadratureScheme, cube_rule,
    hemisphere_nodes, integrate_velocity, rng_stream,
)

UNIT_TOL = 1e-12
POLE_MARGIN = 1e-6
_CHUNK = 2048


@dataclass(frozen=True)
class CollisionParams:
    """Sphere diameter ``a`` and particle mass; ``a = 0`` needs ``boltzmann_limit``."""

    a: float = 0.1
    mass: float = 1.0
    boltzmann_limit: bool = False
    factor_at_contact: bool = False
    strict_stencil: bool = False

    def __post_init__(self):
        if self.a < 0 or (self.a == 0 and not self.boltzmann_limit):
            raise DomainError("diameter must be positive (a = 0 only in Boltzmann-limit mode)")
        if not self.mass > 0:
            raise DomainError("mass must be positive")


# ---------------------------------------------------------------------------
# collision factor models

class FactorModel:
    kind = "abstract"

    def __call__(self, rho):
        raise NotImplementedError

    def derivative(self, rho):
        raise NotImplementedError

    def at_zero(self) -> float:
        return float(self(0.0))


@dataclass(frozen=True)
class Constant(FactorModel):
    c: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if self.c < 0:
            raise DomainError("constant factor must be nonnegative")

    def __call__(self, rho):
        return np.full(np.shape(rho), float(self.c))

    def derivative(self, rho):
        return np.zeros(np.shape(rho))


@dataclass(frozen=True)
class RevisedConstantG(Constant):
    """Revised factor with the pair-correlation functional truncated to a constant."""

    kind = "revised_constant_g"


@dataclass(frozen=True)
class StandardYApprox(FactorModel):
    """Y(rho) = (1 - 11 b rho / 8) / (1 - 2 b rho)."""

    b: float
    kind = "standard_y"

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("b must be positive")

    @classmethod
    def from_diameter(cls, a: float, mass: float = 1.0) -> "StandardYApprox":
        return cls(2.0 * np.pi * a**3 / (3.0 * mass))

    def _gap(self, rho):
        gap = 1.0 - 2.0 * self.b * np.asarray(rho, dtype=float)
        if np.any(gap <= POLE_MARGIN):
            raise PoleProximity(f"1 - 2 b rho = {float(np.min(gap)):.3e} is at the pole")
        return gap

    def __call__(self, rho):
        gap = self._gap(rho)
        return (1.0 - 11.0 * self.b * np.asarray(rho, dtype=float) / 8.0) / gap

    def derivative(self, rho):
        return 5.0 * self.b / 8.0 / self._gap(rho) ** 2


@dataclass(frozen=True)
class VirialTruncated(FactorModel):
    """1 + sum_i b_i y^i with y = 2 pi a^3 rho / 3."""

    coefficients: tuple = ()
    diameter: float = 0.1
    kind = "virial"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.diameter > 0:
            raise DomainError("diameter must be positive")

    @property
    def scale(self) -> float:
        return 2.0 * np.pi * self.diameter**3 / 3.0

    def __call__(self, rho):
        y = self.scale * np.asarray(rho, dtype=float)
        out = np.ones_like(y)
        for i, b in enumerate(self.coefficients, start=1):
            out = out + b * y**i
        if np.any(out < 0):
            raise DomainError("virial factor negative: density outside the admissible range")
        return out

    def derivative(self, rho):
        y = self.scale * np.asarray(rho, dtype=float)
        out = np.zeros_like(y)
        for i, b in enumerate(self.coefficients, start=1):
            out = out + i * b * y ** (i - 1)
        return self.scale * out


def evaluate_factor(model: FactorModel, rho) -> float | np.ndarray:
    out = model(rho)
    return float(out) if np.ndim(out) == 0 else out


def reachable_density(R: float, q: float, alpha0: float = 1.0) -> float:
    """Largest density of a member of M_R: R * int m(V(0)) dv <= R (pi/q)^{3/2} / alpha0^3."""
    return R * (np.pi / q) ** 1.5 / alpha0**3


def lipschitz_estimate(model: FactorModel, R: float, samples: int = 1000, seed: int = 0,
                       q: float = 1.0, alpha0: float = 1.0) -> float:
    """Sampled sup of secant slopes |F(r1) - F(r2)| / |r1 - r2| over the reachable densities."""
    if not R > 0:
        raise DomainError("R must be positive")
    rho_max = reachable_density(R, q, alpha0)
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, rho_max, size=(samples, 2))
    r = np.vstack([r, [[0.0, rho_max]]])
    d = r[:, 0] - r[:, 1]
    keep = np.abs(d) > 1e-12 * max(rho_max, 1.0)
    f = model(r[keep])
    return float(np.max(np.abs(f[:, 0] - f[:, 1]) / np.abs(d[keep]), initial=0.0))


def norm_lipschitz(L0: float, q: float = 1.0, alpha0: float = 1.0) -> float:
    """Constant L(R) of the norm-based condition implied by a density slope L0."""
    return L0 * (np.pi / q) ** 1.5 / alpha0**3


# ---------------------------------------------------------------------------
# velocity geometry

def _check_unit(omega):
    n = np.linalg.norm(omega, axis=-1)
    if np.any(np.abs(n - 1.0) > UNIT_TOL):
        raise DomainError("omega must be a unit vector")


def post_collision_velocities(v, w, omega):
    """(v', w') = (v - (u.omega) omega, w + (u.omega) omega) with u = v - w."""
    v, w, omega = (np.asarray(a, dtype=float) for a in (v, w, omega))
    _check_unit(omega)
    proj = np.sum((v - w) * omega, axis=-1, keepdims=True)
    scale = 1.0 + np.linalg.norm(v - w, axis=-1, keepdims=True)
    if np.any(proj < -UNIT_TOL * scale):
        raise DomainError("hemisphere condition (v - w).omega >= 0 violated")
    return v - proj * omega, w + proj * omega


def decompose_u(u, omega):
    u, omega = np.asarray(u, dtype=float), np.asarray(omega, dtype=float)
    _check_unit(omega)
    par = np.sum(u * omega, axis=-1, keepdims=True) * omega
    return par, u - par


def density(f, t, x, scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """rho(t, x); exact for gridded fields, quadrature over the velocity cube otherwise."""
    if hasattr(f, "density"):
        return float(f.density(t, np.asarray(x, dtype=float)))
    x = np.asarray(x, dtype=float)
    return float(integrate_velocity(lambda v: f(t, x, v), scheme).value)


# ---------------------------------------------------------------------------
# gain and loss

def _check_stencil(f, pts):
    if hasattr(f, "inside") and not np.all(f.inside(pts)):
        raise OutOfDomain("collision stencil leaves the grid bounding box")


def _factor_values(f, model, t, x, omega, a, sign, params, scheme, rho_cache):
    """Collision factor for each omega; a scalar unless evaluated at contact points."""
    if params.factor_at_contact:
        pts = x + sign * 0.5 * a * omega
        if hasattr(f, "density"):
            return model(f.density(t, pts))
        flat = pts.reshape(-1, 3)
        rho = np.array([density(f, t, p, scheme) for p in flat]).reshape(pts.shape[:-1])
        return model(rho)
    if "rho" not in rho_cache:
        rho_cache["rho"] = density(f, t, x, scheme)
    return float(model(rho_cache["rho"]))


def _integrand(f, model, t, x, v, u, omega, params, scheme, which, rho_cache):
    """Collision integrand at partner offsets ``u`` (N, 3) and directions ``omega`` (N, M, 3)."""
    a = params.a
    B = np.einsum("ni,nmi->nm", u, omega)
    if which == "gain":
        upar = B[..., None] * omega
        uperp = u[:, None, :] - upar
        shifted = x - a * omega
        if params.strict_stencil:
            _check_stencil(f, shifted)
        vals = f(t, x, v - upar) * f(t, shifted, v - uperp)
        F = _factor_values(f, model, t, x, omega, a, -1.0, params, scheme, rho_cache)
    else:
        shifted = x + a * omega
        if params.strict_stencil:
            _check_stencil(f, shifted)
        vals = f(t, shifted, (v - u)[:, None, :])
        F = _factor_values(f, model, t, x, omega, a, 1.0, params, scheme, rho_cache)
    return F * vals * np.maximum(B, 0.0)


def collision_integral(f, model: FactorModel, t, x, v, params: CollisionParams,
                       scheme: QuadratureScheme, which: str) -> EstimateWithError:
    """Gain integral, or the loss integral without its f(t, x, v) prefactor."""
    if which not in ("gain", "loss"):
        raise DomainError("which must be 'gain' or 'loss'")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(model, Constant) and model.c == 0.0:
        return EstimateWithError(0.0, 0.0, 0)
    U = scheme.velocity_radius
    rho_cache: dict = {}
    if scheme.velocity_rule == "mc" or scheme.hemisphere_rule == "mc":
        return _collision_mc(f, model, t, x, v, params, scheme, which, rho_cache)
    w, wu = cube_rule(scheme.velocity_nodes, U)
    u = v - w
    live = np.linalg.norm(u, axis=1) > AXIS_EPS   # B vanishes on u = 0
    u, wu = u[live], wu[live]
    total = 0.0
    for lo in range(0, u.shape[0], _CHUNK):
        uc = u[lo:lo + _CHUNK]
        omega, wo = hemisphere_nodes(uc, scheme.polar_nodes, scheme.azimuth_nodes)
        vals = _integrand(f, model, t, x, v, uc, omega, params, scheme, which, rho_cache)
        total += float(wu[lo:lo + _CHUNK] @ (vals @ wo))
    return EstimateWithError(total, 0.0, int(u.shape[0] * scheme.polar_nodes * scheme.azimuth_nodes))


def _collision_mc(f, model, t, x, v, params, scheme, which, rho_cache):
    """Joint Monte Carlo over (w, omega): w uniform in the cube, omega uniform on S^2_+(v - w)."""
    n = scheme.velocity_samples
    U = scheme.velocity_radius
    acc = MeanAccumulator()
    done, k = 0, 0
    while done < n:
        m = min(_CHUNK * 8, n - done)
        rng = rng_stream(scheme.seed, k)
        w = U * rng.uniform(-1.0, 1.0, (m, 3))
        u = v - w
        omega = rng.standard_normal((m, 3))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        omega[np.sum(omega * u, axis=1) < 0] *= -1.0
        vals = _integrand(f, model, t, x, v, u, omega[:, None, :], params, scheme, which, rho_cache)
        acc.add(vals[:, 0])
        done += m
        k += 1
    return acc.estimate((2.0 * U) ** 3 * 2.0 * np.pi)


def gain(f, model_plus: FactorModel, t, x, v, params: CollisionParams,
         scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """Q+(f)(t, x, v) with the u_par / u_perp split."""
    return float(collision_integral(f, model_plus, t, x, v, params, scheme, "gain").value)


def loss(f, model_minus: FactorModel, t, x, v, params: CollisionParams,
         scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """Q-(f)(t, x, v) = f(t, x, v) times the displaced-partner integral."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    here = float(f(t, x, v))
    if here == 0.0:
        return 0.0
    return here * float(collision_integral(f, model_minus, t, x, v, params, scheme, "loss").value)


def collision_along_characteristic(f, models: tuple, s: float, base: PhaseState, field: ForceField,
                                   params: CollisionParams,
                                   scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """Q(f)#(s; t, x, v): gain minus loss at the flowed point (X(s), V(s))."""
    plus, minus = models
    at = field.flow(s, base)
    return (gain(f, plus, s, at.x, at.v, params, scheme)
            - loss(f, minus, s, at.x, at.v, params, scheme))


# ---------------------------------------------------------------------------
# classical hard-sphere Boltzmann operator (independent reference)

def boltzmann_collision(f: Callable, t, x, v, scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """Hard-sphere Boltzmann Q(f) at one point via the (v', w') parametrisation.

    Integrates over the partner velocity w and the full sphere with the
    kernel ((v - w).omega)_+; no spatial displacement, unit factors.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w, ww = cube_rule(scheme.velocity_nodes, scheme.velocity_radius)
    u = v - w
    live = np.linalg.norm(u, axis=1) > AXIS_EPS
    w, ww, u = w[live], ww[live], u[live]
    fv = float(f(t, x, v))
    total = 0.0
    for lo in range(0, w.shape[0], _CHUNK):
        wc, uc = w[lo:lo + _CHUNK], u[lo:lo + _CHUNK]
        omega, wo = hemisphere_nodes(uc, scheme.polar_nodes, scheme.azimuth_nodes)
        proj = np.einsum("ni,nmi->nm", uc, omega)
        vp = v - proj[..., None] * omega
        wp = wc[:, None, :] + proj[..., None] * omega
        integrand = (f(t, x, vp) * f(t, x, wp) - fv * f(t, x, wc)[:, None]) * proj
        total += float(ww[lo:lo + _CHUNK] @ (integrand @ wo))
    return total
