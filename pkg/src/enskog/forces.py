"""External force fields and their bicharacteristic flows.

The flow ``(X, V)(s; t, x, v)`` solves ``dX/ds = V``, ``dV/ds = E(s, X)`` with
``(X, V)(t) = (x, v)``.  Three field families have closed-form flows; anything
else is a :class:`CustomField` integrated with fixed-step Runge-Kutta.

The alpha coefficients describe how the backward flow responds to a
translation ``(xi, eta)`` applied at time ``s``::

    X(0; s, X(s)+xi, V(s)-eta) = X(0) + a1*eta + a2*xi
    V(0; s, X(s)+xi, V(s)-eta) = V(0) - a2*eta - a3*xi
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import AffineStructureViolation, DomainError, IntegratorDivergence
from .quadrature import gauss_legendre

PROBE_STEPS = (1e-3, 1e-4)
AFFINE_TOL = 1e-6
WRONSKIAN_STEP = 1e-3
ALPHA_TOL = 1e-9
DIVERGENCE_LIMIT = 1e150
_SOURCE_NODES = 32


@dataclass(frozen=True)
class PhaseState:
    """A point ``(x, v)`` of phase space stamped with time ``t``.

    ``x`` and ``v`` may carry leading batch dimensions (shape ``(..., 3)``);
    ``t`` is a scalar or broadcasts against the batch shape.
    """

    t: float | np.ndarray
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if x.shape[-1:] != (3,) or v.shape[-1:] != (3,):
            raise DomainError("x and v must have a trailing dimension of 3")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(t))):
            raise DomainError("phase state components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(t) if t.ndim == 0 else t)

    def restamp(self, t) -> "PhaseState":
        return PhaseState(t, self.x, self.v)


@dataclass(frozen=True)
class AlphaTriple:
    a1: float | np.ndarray
    a2: float | np.ndarray
    a3: float | np.ndarray
    wronskian: float | np.ndarray

    def floor(self):
        """min{a2^2 * alpha, a2 * alpha, a2}, the quantity bounded below by alpha_0."""
        return np.minimum(np.minimum(self.a2**2 * self.wronskian, self.a2 * self.wronskian), self.a2)


def _as_time_force(E0: Callable | None) -> Callable[[np.ndarray], np.ndarray]:
    if E0 is None:
        return lambda tau: np.zeros(np.shape(tau) + (3,))

    def wrapped(tau):
        tau = np.asarray(tau, dtype=float)
        out = np.asarray(E0(tau), dtype=float)
        if out.shape == tau.shape + (3,):
            return out
        if out.shape == (3,):
            return np.broadcast_to(out, tau.shape + (3,)).copy()
        flat = np.array([np.asarray(E0(float(s)), dtype=float) for s in tau.ravel()])
        return flat.reshape(tau.shape + (3,))

    return wrapped


def _source_integrals(E0, kernel_x, kernel_v, t, s):
    """Gauss-Legendre integrals  int_t^s kernel(s - tau) E0(tau) dtau  for X and V.

    ``t`` and ``s`` broadcast; kernels act on the elapsed time ``s - tau``.
    """
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    nodes, weights = gauss_legendre(_SOURCE_NODES, 0.0, 1.0)
    d = s - t
    tau = t[..., None] + d[..., None] * nodes
    lag = s[..., None] - tau
    e = E0(tau)
    wx = (weights * kernel_x(lag)) * d[..., None]
    wv = (weights * kernel_v(lag)) * d[..., None]
    return np.einsum("...k,...kj->...j", wx, e), np.einsum("...k,...kj->...j", wv, e)


class ForceField:
    """Base class; subclasses implement :meth:`evaluate`, :meth:`flow` and :meth:`alpha`."""

    kind = "abstract"
    analytic = True

    def evaluate(self, t, x) -> np.ndarray:
        raise NotImplementedError

    def flow(self, s, state: PhaseState) -> PhaseState:
        raise NotImplementedError

    def alpha(self, s, base: PhaseState | None = None) -> AlphaTriple:
        raise NotImplementedError

    def exact_constants(self) -> tuple[float, float | None]:
        """(alpha_0, tau_0) known in closed form; tau_0 is None when a3 == 0."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroField(ForceField):
    kind = "zero"

    def evaluate(self, t, x):
        return np.zeros(np.broadcast_shapes(np.shape(x)))

    def flow(self, s, state):
        d = np.asarray(s, dtype=float) - np.asarray(state.t, dtype=float)
        return PhaseState(s, state.x + d[..., None] * state.v, state.v)

    def alpha(self, s, base=None):
        s = np.asarray(s, dtype=float)
        return AlphaTriple(s * 1.0, np.ones_like(s), np.zeros_like(s), np.ones_like(s))

    def exact_constants(self):
        return 1.0, None


@dataclass(frozen=True)
class TimeOnlyField(ForceField):
    """E(t, x) = E0(t)."""

    E0: Callable | None = None
    kind = "time_only"

    def evaluate(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        return _as_time_force(self.E0)(t)

    def flow(self, s, state):
        s_arr = np.asarray(s, dtype=float)
        d = s_arr - np.asarray(state.t, dtype=float)
        ix, iv = _source_integrals(_as_time_force(self.E0), lambda lag: lag,
                                   lambda lag: np.ones_like(lag), state.t, s_arr)
        X = state.x + d[..., None] * state.v + ix
        V = state.v + iv
        return PhaseState(s, X, V)

    def alpha(self, s, base=None):
        return ZeroField().alpha(s)

    def exact_constants(self):
        return 1.0, None


@dataclass(frozen=True)
class LinearPlusTimeField(ForceField):
    """E(t, x) = e0^2 x + E0(t) with e0 > 0."""

    e0: float = 1.0
    E0: Callable | None = None
    kind = "linear_plus_time"

    def __post_init__(self):
        if not self.e0 > 0:
            raise DomainError("e0 must be positive")

    def evaluate(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        return self.e0**2 * x + _as_time_force(self.E0)(t)

    def flow(self, s, state):
        e = self.e0
        s_arr = np.asarray(s, dtype=float)
        d = (s_arr - np.asarray(state.t, dtype=float))[..., None]
        c, sh = np.cosh(e * d), np.sinh(e * d)
        X = state.x * c + state.v * sh / e
        V = state.x * e * sh + state.v * c
        if self.E0 is not None:
            ix, iv = _source_integrals(_as_time_force(self.E0), lambda lag: np.sinh(e * lag) / e,
                                       lambda lag: np.cosh(e * lag), state.t, s_arr)
            X = X + ix
            V = V + iv
        return PhaseState(s, X, V)

    def alpha(self, s, base=None):
        s = np.asarray(s, dtype=float)
        e = self.e0
        # a1' a2 - a1 a2' = cosh^2 - sinh^2, exactly 1
        return AlphaTriple(np.sinh(e * s) / e, np.cosh(e * s), e * np.sinh(e * s), np.ones_like(s))

    def exact_constants(self):
        return 1.0, max(self.e0, 1.0 / self.e0)


@dataclass(frozen=True)
class CustomField(ForceField):
    """Arbitrary force ``E(t, x)`` integrated with fixed-step Runge-Kutta.

    ``E`` receives times of shape ``(N,)`` and positions ``(N, 3)``.  ``order``
    selects classical RK4 (4) or Heun (2).
    """

    E: Callable = None
    step: float = 1e-3
    order: int = 4
    affine: tuple | None = dc_field(default=None, compare=False)
    kind = "custom"
    analytic = False

    def __post_init__(self):
        if self.E is None:
            raise DomainError("CustomField needs a force callable")
        if not self.step > 0:
            raise DomainError("integrator step must be positive")
        if self.order not in (2, 4):
            raise DomainError("integrator order must be 2 or 4")

    def evaluate(self, t, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 3)
        tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1]).reshape(-1)
        return np.asarray(self.E(tt, flat), dtype=float).reshape(x.shape)

    def flow(self, s, state):
        x = state.x.reshape(-1, 3)
        v = state.v.reshape(-1, 3)
        batch = state.x.shape[:-1]
        t0 = np.broadcast_to(np.asarray(state.t, dtype=float), batch).reshape(-1)
        s1 = np.broadcast_to(np.asarray(s, dtype=float), batch).reshape(-1)
        X, V = self._integrate(t0, s1, x, v)
        return PhaseState(s, X.reshape(state.x.shape), V.reshape(state.v.shape))

    def _integrate(self, t0, s1, x, v):
        span = s1 - t0
        n = int(np.ceil(np.max(np.abs(span), initial=0.0) / self.step))
        X, V = x.copy(), v.copy()
        if n == 0:
            return X, V
        h = span / n
        hc = h[:, None]
        E = self.E
        for k in range(n):
            tk = t0 + k * h
            if self.order == 4:
                a_x, a_v = V, E(tk, X)
                b_x, b_v = V + 0.5 * hc * a_v, E(tk + 0.5 * h, X + 0.5 * hc * a_x)
                c_x, c_v = V + 0.5 * hc * b_v, E(tk + 0.5 * h, X + 0.5 * hc * b_x)
                d_x, d_v = V + hc * c_v, E(tk + h, X + hc * c_x)
                X = X + hc / 6.0 * (a_x + 2.0 * b_x + 2.0 * c_x + d_x)
                V = V + hc / 6.0 * (a_v + 2.0 * b_v + 2.0 * c_v + d_v)
            else:
                a_x, a_v = V, E(tk, X)
                b_x, b_v = V + hc * a_v, E(tk + h, X + hc * a_x)
                X = X + 0.5 * hc * (a_x + b_x)
                V = V + 0.5 * hc * (a_v + b_v)
            if k % 64 == 63 or k == n - 1:
                big = max(np.max(np.abs(X), initial=0.0), np.max(np.abs(V), initial=0.0))
                if not np.isfinite(big) or big > DIVERGENCE_LIMIT:
                    raise IntegratorDivergence(f"trajectory escaped after {k + 1} of {n} steps")
        return X, V

    def alpha(self, s, base: PhaseState | None = None):
        if base is None:
            raise DomainError("custom fields need a base point for alpha probing")
        triple, residual = probe_alpha(self, s, base)
        bad = residual > AFFINE_TOL
        if np.any(bad):
            raise AffineStructureViolation(
                f"backward flow is not affine in (xi, eta): residual {float(np.max(residual)):.3e}")
        return triple

    def exact_constants(self):
        raise DomainError("custom fields have no closed-form constants")


# ---------------------------------------------------------------------------
# linear-response probing

def _probe_offsets(steps=PROBE_STEPS):
    """Translation offsets (xi, eta) used by the probe, shape (P, 6)."""
    offs = [np.zeros(6)]
    for delta in steps:
        for comp in range(6):
            for sign in (1.0, -1.0):
                o = np.zeros(6)
                o[comp] = sign * delta
                offs.append(o)
    return np.array(offs)


def _responses(field: ForceField, s, base: PhaseState, steps=PROBE_STEPS):
    """Backward-flow responses at time 0, shape (N, P, 6), for batched bases."""
    s = np.broadcast_to(np.asarray(s, dtype=float), base.x.shape[:-1]).reshape(-1)
    bx = base.x.reshape(-1, 3)
    bv = base.v.reshape(-1, 3)
    bt = np.broadcast_to(np.asarray(base.t, dtype=float), base.x.shape[:-1]).reshape(-1)
    fwd = field.flow(s, PhaseState(bt, bx, bv))
    offs = _probe_offsets(steps)
    P = offs.shape[0]
    px = fwd.x[:, None, :] + offs[None, :, :3]
    pv = fwd.v[:, None, :] - offs[None, :, 3:]
    ps = np.repeat(s[:, None], P, axis=1)
    back = field.flow(0.0, PhaseState(ps.reshape(-1), px.reshape(-1, 3), pv.reshape(-1, 3)))
    out = np.concatenate([back.x, back.v], axis=-1).reshape(-1, P, 6)
    return out


def _jacobian_from_responses(resp, steps=PROBE_STEPS):
    """Central-difference Jacobians d(X0,V0)/d(xi,eta) for each probe magnitude.

    Returns (jac, second) with jac of shape (M, N, 6, 6) and the second
    differences normalised by the step, shape (M, N, 6, 6).
    """
    center = resp[:, 0, :]
    jacs, seconds = [], []
    idx = 1
    for delta in steps:
        J = np.empty(resp.shape[:1] + (6, 6))
        S = np.empty_like(J)
        for comp in range(6):
            plus, minus = resp[:, idx, :], resp[:, idx + 1, :]
            idx += 2
            J[:, :, comp] = (plus - minus) / (2.0 * delta)
            S[:, :, comp] = (plus + minus - 2.0 * center) / delta
        jacs.append(J)
        seconds.append(S)
    return np.array(jacs), np.array(seconds)


def _alpha_from_jacobian(J):
    """Read (a1, a2, a3) off a Jacobian and measure its departure from scalar blocks."""
    eye = np.eye(3)
    dX_dxi, dX_deta = J[..., :3, :3], J[..., :3, 3:]
    dV_dxi, dV_deta = J[..., 3:, :3], J[..., 3:, 3:]
    a2x = np.trace(dX_dxi, axis1=-2, axis2=-1) / 3.0
    a2v = -np.trace(dV_deta, axis1=-2, axis2=-1) / 3.0
    a1 = np.trace(dX_deta, axis1=-2, axis2=-1) / 3.0
    a3 = -np.trace(dV_dxi, axis1=-2, axis2=-1) / 3.0
    a2 = 0.5 * (a2x + a2v)
    model = np.zeros_like(J)
    model[..., :3, :3] = a2[..., None, None] * eye
    model[..., :3, 3:] = a1[..., None, None] * eye
    model[..., 3:, :3] = -a3[..., None, None] * eye
    model[..., 3:, 3:] = -a2[..., None, None] * eye
    structure = np.max(np.abs(J - model), axis=(-2, -1))
    return a1, a2, a3, structure


def probe_alpha(field: ForceField, s, base: PhaseState):
    """Extract alpha coefficients by probing the backward flow.

    Works on batches.  Returns ``(AlphaTriple, residual)`` where ``residual``
    is the relative departure from the affine, scalar-coefficient structure
    (zero for a field inside the hypothesis class, up to rounding).
    """
    s = np.asarray(s, dtype=float)
    batch = np.broadcast_shapes(s.shape, base.x.shape[:-1])
    h = WRONSKIAN_STEP
    sv = np.broadcast_to(s, batch).reshape(-1)
    n = sv.size
    bx = np.broadcast_to(base.x, batch + (3,)).reshape(-1, 3)
    bv = np.broadcast_to(base.v, batch + (3,)).reshape(-1, 3)
    bt = np.broadcast_to(np.asarray(base.t, dtype=float), batch).reshape(-1)
    base_flat = PhaseState(bt, bx, bv)
    resp = _responses(field, sv, base_flat)
    jac, second = _jacobian_from_responses(resp)
    a1, a2, a3, structure = _alpha_from_jacobian(jac)
    # index 0: large probe, 1: small probe
    scale = 1.0 + np.max(np.abs(jac[0]), axis=(-2, -1))
    consistency = np.max(np.abs(jac[0] - jac[1]), axis=(-2, -1))
    curvature = np.max(np.abs(second[0]), axis=(-2, -1))
    residual = np.maximum.reduce([structure[0], structure[1], consistency, curvature]) / scale
    A1, A2, A3 = a1[0], a2[0], a3[0]
    # derivatives in s for the Wronskian use the large probe only
    stacked = PhaseState(np.tile(bt, 2), np.tile(bx, (2, 1)), np.tile(bv, (2, 1)))
    big = PROBE_STEPS[:1]
    resp_h = _responses(field, np.concatenate([sv - h, sv + h]), stacked, big)
    jac_h, _ = _jacobian_from_responses(resp_h, big)
    b1, b2, _, _ = _alpha_from_jacobian(jac_h)
    dA1 = (b1[0, n:] - b1[0, :n]) / (2.0 * h)
    dA2 = (b2[0, n:] - b2[0, :n]) / (2.0 * h)
    W = dA1 * A2 - A1 * dA2
    shape = batch
    triple = AlphaTriple(A1.reshape(shape), A2.reshape(shape), A3.reshape(shape), W.reshape(shape))
    return triple, residual.reshape(shape)


# ---------------------------------------------------------------------------
# module-level operations

def evaluate_force(field: ForceField, t, x) -> np.ndarray:
    return field.evaluate(t, x)


def flow(field: ForceField, s, state: PhaseState) -> PhaseState:
    """Bicharacteristic flow of ``state`` to time ``s``."""
    if np.any(np.asarray(s) < 0):
        raise DomainError("flow target time must be nonnegative")
    return field.flow(s, state)


def alpha_coefficients(field: ForceField, s, base: PhaseState) -> AlphaTriple:
    if np.any(np.asarray(s) < 0):
        raise DomainError("s must be nonnegative")
    return field.alpha(s, base)


def derivative_identity(field: ForceField, base: PhaseState, step: float = 1e-5):
    """Central-difference dX(0)/dx and dV(0)/dv at ``base``, next to a2(t).

    Returns ``(dX_dx, dV_dv, a2)`` with 3x3 Jacobians.
    """
    x, v = np.asarray(base.x, dtype=float), np.asarray(base.v, dtype=float)
    pts_x, pts_v = [], []
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        pts_x += [x + e, x - e]
        pts_v += [v + e, v - e]
    xs = np.array(pts_x + [x] * 6)
    vs = np.array([v] * 6 + pts_v)
    back = field.flow(0.0, PhaseState(base.t, xs, vs))
    dX = np.stack([(back.x[2 * k] - back.x[2 * k + 1]) / (2 * step) for k in range(3)], axis=1)
    dV = np.stack([(back.v[6 + 2 * k] - back.v[6 + 2 * k + 1]) / (2 * step) for k in range(3)], axis=1)
    a2 = np.asarray(field.alpha(base.t, base).a2, dtype=float)
    return dX, dV, float(a2)


# ---------------------------------------------------------------------------
# hypothesis checking

@dataclass(frozen=True)
class SampleSpec:
    """Latin-hypercube sampling box for (s, t, x, v)."""

    s_range: tuple = (0.0, 1.0)
    t_range: tuple = (0.0, 1.0)
    x_range: tuple = (-2.0, 2.0)
    v_range: tuple = (-2.0, 2.0)
    count: int = 1000
    seed: int = 0
    tau0_bound: float | None = None
    alpha0_bound: float | None = None
    boundary_samples: int = 10

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("sample count must be >= 1")
        if self.s_range[0] < 0:
            raise DomainError("s samples must be nonnegative")

    def draw(self):
        lhs = qmc.LatinHypercube(d=8, seed=self.seed).random(self.count)
        lo = np.array([self.s_range[0], self.t_range[0]] + [self.x_range[0]] * 3 + [self.v_range[0]] * 3)
        hi = np.array([self.s_range[1], self.t_range[1]] + [self.x_range[1]] * 3 + [self.v_range[1]] * 3)
        pts = qmc.scale(lhs, lo, hi) if np.all(hi > lo) else lo + lhs * (hi - lo)
        s, t, x, v = pts[:, 0], pts[:, 1], pts[:, 2:5], pts[:, 5:8]
        k = min(self.boundary_samples, self.count)
        if k and self.s_range[0] == 0.0:
            s = np.concatenate([s, np.zeros(k)])
            t, x, v = np.concatenate([t, t[:k]]), np.concatenate([x, x[:k]]), np.concatenate([v, v[:k]])
        return s, t, x, v


CONDITIONS = ("force01", "force02", "force03", "force04", "force05")


@dataclass
class HypothesisReport:
    passed: dict
    alpha0: float
    tau0: float | None
    alpha3_zero: bool
    sample_count: int
    counterexample: dict | None = None
    affine_residual: float = 0.0
    note: str = "alpha0 and tau0 are sampled estimates"

    def __post_init__(self):
        if not self.ok and self.counterexample is None:
            raise DomainError("a failed report must carry a counterexample")

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {
            "passed": dict(self.passed),
            "ok": self.ok,
            "alpha0_estimate": self.alpha0,
            "tau0_estimate": self.tau0,
            "alpha3_identically_zero": self.alpha3_zero,
            "sample_count": self.sample_count,
            "affine_residual": self.affine_residual,
            "counterexample": self.counterexample,
            "note": self.note,
        }


def _point(i, s, t, x, v, al, cond, reason):
    return {
        "condition": cond,
        "reason": reason,
        "s": float(s[i]), "t": float(t[i]),
        "x": [float(c) for c in x[i]], "v": [float(c) for c in v[i]],
        "a1": float(al.a1[i]), "a2": float(al.a2[i]), "a3": float(al.a3[i]),
        "wronskian": float(al.wronskian[i]),
    }


def _closed_form_affine_residual(field, s, t, x, v, al, seed):
    """Compare the closed-form alphas with the flow on one random translation per sample."""
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-1.0, 1.0, x.shape)
    eta = rng.uniform(-1.0, 1.0, v.shape)
    base = PhaseState(t, x, v)
    at_s = field.flow(s, base)
    back0 = field.flow(0.0, base)
    moved = field.flow(0.0, PhaseState(s, at_s.x + xi, at_s.v - eta))
    px = back0.x + al.a1[:, None] * eta + al.a2[:, None] * xi
    pv = back0.v - al.a2[:, None] * eta - al.a3[:, None] * xi
    scale = 1.0 + np.maximum(np.abs(moved.x).max(axis=1), np.abs(moved.v).max(axis=1))
    err = np.maximum(np.abs(moved.x - px).max(axis=1), np.abs(moved.v - pv).max(axis=1))
    return err / scale


def check_hypotheses(field: ForceField, sampling: SampleSpec = SampleSpec()) -> HypothesisReport:
    """Evaluate the five structural conditions on sampled points."""
    s, t, x, v = sampling.draw()
    n = s.size
    if field.analytic:
        al = field.alpha(s)
        al = AlphaTriple(*(np.broadcast_to(np.asarray(c, dtype=float), (n,)) for c in
                           (al.a1, al.a2, al.a3, al.wronskian)))
        resid = _closed_form_affine_residual(field, s, t, x, v, al, sampling.seed)
        affine_tol = 1e-8
    else:
        al, resid = probe_alpha(field, s, PhaseState(t, x, v))
        affine_tol = AFFINE_TOL

    passed = {c: True for c in CONDITIONS}
    counter = None

    def fail(cond, mask, reason):
        nonlocal counter
        if np.any(mask):
            passed[cond] = False
            if counter is None:
                counter = _point(int(np.argmax(mask)), s, t, x, v, al, cond, reason)

    a1_bad = np.where(s > 0, ~(al.a1 > 0), al.a1 < -ALPHA_TOL)
    fail("force01", a1_bad, "a1 sign")
    fail("force01", ~(al.a2 > 0), "a2 not positive")
    fail("force01", al.a3 < -ALPHA_TOL, "a3 negative")
    affine_bad = ~(resid <= affine_tol)
    fail("force02", affine_bad, "position response not affine")
    fail("force03", affine_bad, "velocity response not affine")

    a3_zero = bool(np.all(np.abs(al.a3) <= ALPHA_TOL))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(al.a1, al.a3) / al.a2
    tau0 = None if a3_zero else float(np.max(ratio))
    if not a3_zero:
        ratio_bad = ~np.isfinite(ratio) | (al.a2 <= 0)
        if sampling.tau0_bound is not None:
            ratio_bad |= ratio > sampling.tau0_bound
        fail("force04", ratio_bad, "max(a1, a3)/a2 exceeds tau0")

    floor = al.floor()
    alpha0 = float(np.min(floor))
    bound = 0.0 if sampling.alpha0_bound is None else sampling.alpha0_bound
    fail("force05", ~(floor > bound) if sampling.alpha0_bound is None else ~(floor >= bound),
         "min{a2^2 a, a2 a, a2} below alpha0")

    # fail() runs in condition order, so the stored counterexample is the earliest failure
    return HypothesisReport(passed, alpha0, tau0, a3_zero, int(n), counter, float(np.max(resid)))


# ---------------------------------------------------------------------------
# affine expression grammar for configured custom fields

_TERM = re.compile(r"\s*([+-]?)\s*([0-9]*\.?[0-9]*(?:[eE][+-]?[0-9]+)?)\s*\*?\s*(x1|x2|x3|t)?\s*")


def parse_affine_component(text: str, allow_x: bool = True) -> tuple[np.ndarray, float, float]:
    """Parse ``"c1*x1 + c2*x2 - 0.5*t + 3"`` into (x-coefficients, t-coefficient, constant)."""
    src = text.replace(" ", "")
    if not src:
        raise DomainError("empty force expression")
    coef_x = np.zeros(3)
    coef_t = 0.0
    const = 0.0
    pos = 0
    while pos < len(src):
        m = _TERM.match(src, pos)
        if m is None or m.end() == pos:
            raise DomainError(f"cannot parse force expression {text!r} at {src[pos:]!r}")
        sign, num, var = m.groups()
        if not num and not var:
            raise DomainError(f"cannot parse force expression {text!r} at {src[pos:]!r}")
        c = float(num) if num else 1.0
        if sign == "-":
            c = -c
        if var is None:
            const += c
        elif var == "t":
            coef_t += c
        else:
            if not allow_x:
                raise DomainError(f"position term not allowed in {text!r}")
            coef_x[int(var[1]) - 1] += c
        pos = m.end()
        if pos < len(src) and src[pos] not in "+-":
            raise DomainError(f"cannot parse force expression {text!r} at {src[pos:]!r}")
    return coef_x, coef_t, const


def affine_time_force(components) -> Callable:
    """E0(t) = b*t + c from three expression strings with only t/constant terms."""
    parsed = [parse_affine_component(c, allow_x=False) for c in components]
    b = np.array([p[1] for p in parsed])
    c = np.array([p[2] for p in parsed])
    if not np.any(b) and not np.any(c):
        return None
    return lambda tau: np.asarray(tau, dtype=float)[..., None] * b + c


def custom_field_from_expressions(components, step: float = 1e-3, order: int = 4) -> CustomField:
    """CustomField for E_i(t, x) = sum_j A_ij x_j + b_i t + c_i given as strings."""
    if len(components) != 3:
        raise DomainError("a custom force needs exactly three component expressions")
    parsed = [parse_affine_component(c) for c in components]
    A = np.array([p[0] for p in parsed])
    b = np.array([p[1] for p in parsed])
    c = np.array([p[2] for p in parsed])

    def E(t, x):
        return x @ A.T + np.asarray(t, dtype=float)[..., None] * b + c

    return CustomField(E, step=step, order=order, affine=(A, b, c))
