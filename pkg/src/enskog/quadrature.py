"""Integration engines for velocity space, the hemisphere S^2_+(u) and time.

Deterministic rules are tensor Gauss-Legendre products; stochastic rules draw
from counter-based Philox streams, one stream per fixed-size block, so an
estimate depends only on ``(seed, n)`` and never on evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateAxis, DomainError

MC_BLOCK = 1 << 16
AXIS_EPS = 1e-12


@dataclass(frozen=True)
class QuadratureScheme:
    """Node/weight configuration for the three integration domains.

    ``velocity_radius`` is the half-width U_max of the truncation cube in
    velocity space; the hemisphere product rule uses ``polar_nodes`` Gauss
    nodes in cos(theta) and ``azimuth_nodes`` equispaced azimuths.
    """

    velocity_rule: str = "gauss"
    velocity_radius: float = 6.0
    velocity_nodes: int = 24
    velocity_samples: int = 100_000
    hemisphere_rule: str = "gauss"
    polar_nodes: int = 16
    azimuth_nodes: int = 32
    hemisphere_samples: int = 2048
    time_nodes: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.velocity_rule not in ("gauss", "mc"):
            raise DomainError(f"unknown velocity rule {self.velocity_rule!r}")
        if self.hemisphere_rule not in ("gauss", "mc"):
            raise DomainError(f"unknown hemisphere rule {self.hemisphere_rule!r}")
        if not self.velocity_radius > 0:
            raise DomainError("velocity_radius must be positive")
        counts = (self.velocity_nodes, self.velocity_samples, self.polar_nodes,
                  self.azimuth_nodes, self.hemisphere_samples, self.time_nodes)
        if min(counts) < 1:
            raise DomainError("node and sample counts must be >= 1")

    @classmethod
    def for_weights(cls, q: float, **kwargs) -> "QuadratureScheme":
        """Scheme whose velocity cube is 6/sqrt(q) wide, so the m-weight tail is < 1e-15."""
        kwargs.setdefault("velocity_radius", 6.0 / np.sqrt(q))
        return cls(**kwargs)


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float = 0.0
    samples_used: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise DomainError("stderr must be nonnegative")

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------------------
# node sets

@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def cube_rule(n: int, half_width: float, center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on a 3-cube, returned as (n^3, 3) nodes and weights."""
    x, w = gauss_legendre(n, -half_width, half_width)
    g = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return g + np.asarray(center, dtype=float), wt


@lru_cache(maxsize=32)
def _canonical_hemisphere(n_polar: int, n_azimuth: int) -> tuple[np.ndarray, np.ndarray]:
    mu, wmu = gauss_legendre(n_polar, 0.0, 1.0)
    phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    sin_t = np.sqrt(1.0 - mu**2)
    nodes = np.stack([
        np.outer(sin_t, np.cos(phi)),
        np.outer(sin_t, np.sin(phi)),
        np.outer(mu, np.ones_like(phi)),
    ], axis=-1).reshape(-1, 3)
    weights = np.outer(wmu, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def hemisphere_rule(n_polar: int = 16, n_azimuth: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the upper hemisphere (pole +z); weights sum to 2*pi."""
    return _canonical_hemisphere(int(n_polar), int(n_azimuth))


def sphere_rule(n_polar: int, n_azimuth: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the full sphere; symmetric under omega -> -omega when n_azimuth is even."""
    mu, wmu = gauss_legendre(n_polar, -1.0, 1.0)
    phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    sin_t = np.sqrt(1.0 - mu**2)
    nodes = np.stack([
        np.outer(sin_t, np.cos(phi)),
        np.outer(sin_t, np.sin(phi)),
        np.outer(mu, np.ones_like(phi)),
    ], axis=-1).reshape(-1, 3)
    weights = np.outer(wmu, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)).ravel()
    return nodes, weights


def orthonormal_frames(axes: np.ndarray) -> np.ndarray:
    """Rotation matrices whose third column is ``axes/|axes|``.

    ``axes`` has shape (..., 3); the result has shape (..., 3, 3) and maps the
    canonical +z pole onto each axis.
    """
    axes = np.asarray(axes, dtype=float)
    norm = np.linalg.norm(axes, axis=-1, keepdims=True)
    if np.any(norm < AXIS_EPS):
        raise DegenerateAxis("hemisphere axis has norm below 1e-12")
    n = axes / norm
    helper = np.zeros_like(n)
    use_x = np.abs(n[..., 0]) < 0.9
    helper[..., 0] = np.where(use_x, 1.0, 0.0)
    helper[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = helper - np.sum(helper * n, axis=-1, keepdims=True) * n
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(n, e1)
    return np.stack([e1, e2, n], axis=-1)


def hemisphere_nodes(u: np.ndarray, n_polar: int, n_azimuth: int) -> tuple[np.ndarray, np.ndarray]:
    """Hemisphere rule aligned with each row of ``u``: nodes (..., M, 3), weights (M,)."""
    nodes, weights = hemisphere_rule(n_polar, n_azimuth)
    frames = orthonormal_frames(u)
    return np.einsum("...ij,mj->...mi", frames, nodes), weights


# ---------------------------------------------------------------------------
# random streams

def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for stream ``stream`` of ``seed``; streams never overlap."""
    bitgen = np.random.Philox(key=int(seed) & ((1 << 128) - 1))
    if stream:
        bitgen = bitgen.jumped(int(stream))
    return np.random.Generator(bitgen)


def uniform_hemisphere(rng: np.random.Generator, axis: np.ndarray, n: int) -> np.ndarray:
    """``n`` uniform unit vectors with nonnegative projection on ``axis``."""
    axis = np.asarray(axis, dtype=float)
    if np.linalg.norm(axis) < AXIS_EPS:
        raise DegenerateAxis("hemisphere axis has norm below 1e-12")
    w = rng.standard_normal((n, 3))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    flip = w @ axis < 0
    w[flip] *= -1.0
    return w


# ---------------------------------------------------------------------------
# MC domains

@dataclass(frozen=True)
class Cube:
    half_width: float
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def measure(self) -> float:
        return float((2.0 * self.half_width) ** len(self.center))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        return c + self.half_width * rng.uniform(-1.0, 1.0, size=(n, c.size))


@dataclass(frozen=True)
class Hemisphere:
    axis: tuple = (0.0, 0.0, 1.0)

    @property
    def measure(self) -> float:
        return 2.0 * np.pi

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return uniform_hemisphere(rng, np.asarray(self.axis, dtype=float), n)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def measure(self) -> float:
        return float(self.hi - self.lo)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class Product:
    """Cartesian product; the integrand receives one sample array per factor."""

    factors: tuple

    @property
    def measure(self) -> float:
        return float(np.prod([f.measure for f in self.factors]))

    def sample(self, rng: np.random.Generator, n: int) -> tuple:
        return tuple(f.sample(rng, n) for f in self.factors)


class MeanAccumulator:
    """Shifted running sums for a mean and its standard error.

    The shift (first observed value) keeps the variance exact for constant
    data and well conditioned otherwise.
    """

    def __init__(self):
        self.n = 0
        self.shift = None
        self.s1 = 0.0
        self.s2 = 0.0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return
        if self.shift is None:
            self.shift = float(values[0])
        d = values - self.shift
        self.s1 += float(d.sum())
        self.s2 += float(d @ d)
        self.n += values.size

    def estimate(self, scale: float = 1.0) -> EstimateWithError:
        if self.n == 0:
            return EstimateWithError(0.0, 0.0, 0)
        mean_d = self.s1 / self.n
        if self.n > 1:
            var = max(self.s2 - self.n * mean_d**2, 0.0) / (self.n - 1)
        else:
            var = 0.0
        value = scale * (self.shift + mean_d)
        return EstimateWithError(value, abs(scale) * np.sqrt(var / self.n), self.n)


def mc_integrate(g: Callable, domain, n: int, seed: int = 0,
                 block: int = MC_BLOCK) -> EstimateWithError:
    """Plain Monte Carlo estimate of the integral of ``g`` over ``domain``.

    Block ``k`` always draws from stream ``k`` of ``seed``, so the estimate is
    reproducible regardless of how blocks are scheduled.
    """
    if n < 2:
        raise DomainError("Monte Carlo needs at least 2 samples")
    acc = MeanAccumulator()
    done = 0
    k = 0
    while done < n:
        m = min(block, n - done)
        rng = rng_stream(seed, k)
        sample = domain.sample(rng, m)
        vals = g(*sample) if isinstance(sample, tuple) else g(sample)
        acc.add(np.broadcast_to(vals, (m,)))
        done += m
        k += 1
    return acc.estimate(domain.measure)


# ---------------------------------------------------------------------------
# deterministic / scheme-driven integrators

def integrate_velocity(g: Callable[[np.ndarray], np.ndarray], scheme: QuadratureScheme,
                       center=(0.0, 0.0, 0.0)) -> EstimateWithError:
    """Integral of ``g`` over the cube of half-width ``scheme.velocity_radius``."""
    if scheme.velocity_rule == "mc":
        return mc_integrate(g, Cube(scheme.velocity_radius, tuple(center)),
                            scheme.velocity_samples, scheme.seed)
    nodes, weights = cube_rule(scheme.velocity_nodes, scheme.velocity_radius, center)
    vals = np.broadcast_to(np.asarray(g(nodes), dtype=float), weights.shape)
    return EstimateWithError(float(vals @ weights), 0.0, weights.size)


def integrate_hemisphere(g: Callable[[np.ndarray], np.ndarray], u, scheme: QuadratureScheme) -> EstimateWithError:
    """Integral of ``g`` over ``{omega in S^2 : omega.u >= 0}``."""
    u = np.asarray(u, dtype=float)
    if np.linalg.norm(u) < AXIS_EPS:
        raise DegenerateAxis("hemisphere axis has norm below 1e-12")
    if scheme.hemisphere_rule == "mc":
        return mc_integrate(g, Hemisphere(tuple(u)), scheme.hemisphere_samples, scheme.seed)
    nodes, weights = hemisphere_nodes(u, scheme.polar_nodes, scheme.azimuth_nodes)
    vals = np.broadcast_to(np.asarray(g(nodes), dtype=float), weights.shape)
    return EstimateWithError(float(vals @ weights), 0.0, weights.size)


def integrate_time(g: Callable[[np.ndarray], np.ndarray], t0: float, t1: float,
                   scheme: QuadratureScheme | int) -> EstimateWithError:
    """Gauss-Legendre approximation of the integral of ``g`` over [t0, t1]."""
    if t1 < t0:
        raise DomainError("integrate_time requires t0 <= t1")
    n = scheme if isinstance(scheme, (int, np.integer)) else scheme.time_nodes
    if t1 == t0:
        return EstimateWithError(0.0, 0.0, 0)
    s, w = gauss_legendre(n, t0, t1)
    vals = np.broadcast_to(np.asarray(g(s), dtype=float), w.shape)
    return EstimateWithError(float(vals @ w), 0.0, w.size)


def composite_gauss(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with ``panels`` equal panels on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    x, w = _leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def sum_in_order(parts: Sequence[float]) -> float:
    """Left-to-right float sum; keeps reductions independent of worker count."""
    total = 0.0
    for p in parts:
        total += float(p)
    return total
