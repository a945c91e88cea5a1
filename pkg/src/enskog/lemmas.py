"""Numerical certification of the auxiliary inequalities and the gain/loss bounds.

Every check returns a :class:`BoundCheck`, a left-hand-side estimate with its
error, the closed-form bound and the inputs that produced it.  Sweeps draw
seeded random inputs and collect checks into a :class:`VerificationReport`.

The five-dimensional integrals over (s, u, omega) use Monte Carlo by default.
Velocities are drawn from the Gaussian that the q-weight induces on u (centre
z2/a2, variance 1/(2 q a2^2) per component), directions uniformly on the
hemisphere around u, and times uniformly on [0, t].  A small tensor rule
(``engine="gauss"``) is available for smoke tests.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .collision import CollisionParams, Constant, FactorModel, gain, lipschitz_estimate, loss, norm_lipschitz
from .errors import DomainError, HypothesisViolation
from .forces import (
    ForceField, HypothesisReport, PhaseState, SampleSpec, ZeroField, check_hypotheses, derivative_identity,
)
from .quadrature import (
    AXIS_EPS, EstimateWithError, MeanAccumulator, QuadratureScheme, cube_rule, gauss_legendre,
    hemisphere_nodes, rng_stream,
)
from .weighted import WeightParams

TAIL = 1e-16                      # integrands are truncated below this fraction of their peak
LOG_TAIL = -np.log(TAIL)
ORTHO_TOL = 1e-10
ROUND_TOL = 1e-12


# ---------------------------------------------------------------------------
# records

@dataclass
class BoundCheck:
    """One inequality check: passes when ``lhs.value + 3 lhs.stderr <= bound (1 + rtol)``.

    ``stderr`` is a Monte Carlo standard error (zero for deterministic rules);
    ``rtol`` is a rounding allowance for bounds that are attained exactly.
    """

    lemma: str
    lhs: EstimateWithError
    bound: float
    inputs: dict
    truncation: dict = dc_field(default_factory=dict)
    rtol: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.margin >= 0)

    @property
    def margin(self) -> float:
        return float(self.bound * (1.0 + self.rtol) - (self.lhs.value + 3.0 * self.lhs.stderr))

    def scaled(self, factor: float) -> "BoundCheck":
        """Copy with the estimate (value and error) multiplied by ``factor``."""
        est = EstimateWithError(self.lhs.value * factor, self.lhs.stderr * abs(factor), self.lhs.samples_used)
        return replace(self, lhs=est)

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "inputs": _jsonable(self.inputs),
            "lhs": float(self.lhs.value),
            "stderr": float(self.lhs.stderr),
            "samples": int(self.lhs.samples_used),
            "bound": float(self.bound),
            "pass": self.passed,
            "truncation": _jsonable(self.truncation),
            "rtol": self.rtol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCheck":
        est = EstimateWithError(float(d["lhs"]), float(d["stderr"]), int(d.get("samples", 0)))
        return cls(d["lemma"], est, float(d["bound"]), dict(d["inputs"]), dict(d.get("truncation", {})),
                   float(d.get("rtol", 0.0)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    return obj


@dataclass
class VerificationReport:
    checks: list = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "count": len(self.checks),
                "failures": len(self.failures()), "checks": [c.to_dict() for c in self.checks]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "VerificationReport":
        with open(path) as fh:
            d = json.load(fh)
        return cls([BoundCheck.from_dict(c) for c in d["checks"]])


# ---------------------------------------------------------------------------
# closed-form constants

def loss_constant(p: float = 1.0, q: float = 1.0, alpha0: float = 1.0) -> float:
    """Bound on the reduced loss integral: 4 pi^{5/2} / (alpha0 sqrt p) (4/3 + q^{-3/2})."""
    _positive(p=p, q=q, alpha0=alpha0)
    return 4.0 * np.pi**2.5 / (alpha0 * np.sqrt(p)) * (4.0 / 3.0 + q**-1.5)


def gain_constant(p: float = 1.0, q: float = 1.0, alpha0: float = 1.0, a: float = 0.0,
                  tau0: float | None = None) -> float:
    """Bound on the reduced gain integral; ``tau0=None`` is the a3 == 0 branch."""
    _positive(p=p, q=q, alpha0=alpha0)
    if a < 0:
        raise DomainError("a must be nonnegative")
    tau = 0.0 if tau0 is None else tau0
    return 4.0 * np.pi**2 / alpha0 * (np.sqrt(np.pi) / np.sqrt(p) + a * tau**2) * (4.0 / 3.0 + q**-1.5)


def estimate_constant(p: float = 1.0, q: float = 1.0, alpha0: float = 1.0, a: float = 0.0,
                      tau0: float | None = None) -> float:
    """K = max of the loss and gain constants."""
    return max(loss_constant(p, q, alpha0), gain_constant(p, q, alpha0, a, tau0))


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise DomainError(f"{k} must be positive")


def field_constants(field: ForceField, report: HypothesisReport | None = None) -> tuple[float, float | None]:
    """(alpha0, tau0): closed forms for analytic kinds, sampled estimates otherwise."""
    if field.analytic:
        return field.exact_constants()
    if report is None:
        report = check_hypotheses(field, SampleSpec(count=200))
    if not report.ok:
        raise HypothesisViolation(f"force field fails the hypotheses: {report.counterexample}")
    return report.alpha0, (None if report.alpha3_zero else report.tau0)


# ---------------------------------------------------------------------------
# lemmas 1-4

def verify_lemma1(z, u_par, u_perp, omega, s: float, a: float) -> bool:
    """Both sign branches of the four-square inequality for orthogonal u_par, u_perp."""
    z, up, uq, om = (np.asarray(c, dtype=float) for c in (z, u_par, u_perp, omega))
    if abs(np.linalg.norm(om) - 1.0) > ROUND_TOL * 10:
        raise DomainError("omega must be a unit vector")
    if abs(up @ uq) > ORTHO_TOL * (1.0 + np.linalg.norm(up) * np.linalg.norm(uq)):
        raise DomainError("u_par and u_perp must be orthogonal")
    if up @ om < 0:
        raise DomainError("u_par . omega must be nonnegative")
    if s < 0 or a < 0:
        raise DomainError("s and a must be nonnegative")
    return bool(np.all(_lemma1_gap(z, up, uq, om, s, a) >= 0))


def _lemma1_gap(z, up, uq, om, s, a):
    """lhs - rhs + rounding allowance for both branches; rows broadcast."""
    s = np.asarray(s, dtype=float)[..., None]
    a = np.asarray(a, dtype=float)[..., None]
    sq = lambda w: np.sum(w * w, axis=-1)
    scale = (np.linalg.norm(z, axis=-1) + s[..., 0] * (np.linalg.norm(up, axis=-1)
                                                       + np.linalg.norm(uq, axis=-1)) + a[..., 0]) ** 2
    slack = ROUND_TOL * (1.0 + scale) + 2.0 * s[..., 0] ** 2 * np.abs(np.sum(up * uq, axis=-1))
    gaps = []
    for sg in (1.0, -1.0):
        lhs = sq(z + sg * s * up) + sq(z + sg * s * uq - sg * a * om)
        rhs = sq(z) + sq(z + sg * s * (up + uq) - sg * a * om)
        gaps.append(lhs - rhs + slack)
    return np.minimum(*gaps)


def lemma1_sweep(count: int = 100_000, seed: int = 0) -> BoundCheck:
    """Random valid tuples; the check records the number of violations (bound 0)."""
    rng = np.random.default_rng(seed)
    om = rng.standard_normal((count, 3))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    up = rng.standard_normal((count, 3)) * rng.uniform(0.0, 3.0, (count, 1))
    up[np.sum(up * om, axis=1) < 0] *= -1.0
    raw = rng.standard_normal((count, 3)) * 2.0
    nrm = np.sum(up * up, axis=1, keepdims=True)
    uq = raw - np.divide(np.sum(raw * up, axis=1, keepdims=True), nrm, out=np.zeros_like(nrm), where=nrm > 0) * up
    z = rng.normal(0.0, 2.0, (count, 3))
    s = rng.uniform(0.0, 3.0, count)
    a = rng.uniform(0.0, 1.0, count)
    bad = int(np.sum(_lemma1_gap(z, up, uq, om, s, a) < 0))
    return BoundCheck("lemma1", EstimateWithError(float(bad), 0.0, count), 0.0, {"count": count, "seed": seed})


def verify_lemma2(z: float, u: float, p: float) -> BoundCheck:
    """int_0^inf exp(-p (z + s u)^2) ds against sqrt(pi) / (sqrt(p) |u|)."""
    if u == 0:
        raise DomainError("u must be nonzero")
    _positive(p=p)
    # y = z + s u runs from z towards sign(u) * inf; reflect so it runs upwards
    lo = z * np.sign(u)
    top = np.sqrt(LOG_TAIL / p)
    if lo >= top:
        value, err = 0.0, 0.0
    else:
        pts = [0.0] if lo < 0.0 < top else None
        value, err = quad(lambda y: np.exp(-p * y * y), lo, top, points=pts, epsabs=1e-14, epsrel=1e-12, limit=200)
        value, err = value / abs(u), err / abs(u)
    bound = np.sqrt(np.pi) / (np.sqrt(p) * abs(u))
    s_max = max(0.0, (top - lo) / abs(u))
    # the bound is attained as z sign(u) -> -inf, so equality up to rounding must pass
    return BoundCheck("lemma2", EstimateWithError(value, 0.0, 0), float(bound),
                      {"z": z, "u": u, "p": p}, {"s_max": s_max, "quad_abserr": err}, rtol=ROUND_TOL)


def _angular_average(r, zn, q):
    """int over |u| = r of exp(-q |z - u|^2) dS, divided by r^2."""
    r = np.asarray(r, dtype=float)
    if zn == 0.0:
        return 4.0 * np.pi * np.exp(-q * r * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.pi / (q * r * zn) * np.exp(-q * (r - zn) ** 2) * -np.expm1(-4.0 * q * r * zn)
    return np.where(r > 0, out, 4.0 * np.pi * np.exp(-q * zn * zn))


def verify_lemma3(z, q: float, gamma: float) -> BoundCheck:
    """int |u|^{gamma-1} exp(-q |z-u|^2) du against 4 pi/(gamma+2) + pi/q^{3/2}.

    Spherical shells around the origin integrate the angles in closed form; the
    radial integrand r^{gamma+1} is regularised by y = r^{gamma+2}.
    """
    _positive(q=q)
    if not -2.0 < gamma <= 1.0:
        raise DomainError("gamma must lie in (-2, 1]")
    zn = float(np.linalg.norm(np.asarray(z, dtype=float)))
    k = gamma + 2.0
    r_max = zn + np.sqrt(LOG_TAIL / q)
    y_max = r_max**k
    g = lambda y: float(_angular_average(y ** (1.0 / k), zn, q)) / k
    pts = [zn**k] if 0.0 < zn < r_max else None
    value, err = quad(g, 0.0, y_max, points=pts, epsabs=1e-13, epsrel=1e-11, limit=400)
    bound = 4.0 * np.pi / k + np.pi / q**1.5
    return BoundCheck("lemma3", EstimateWithError(value, 0.0, 0), float(bound),
                      {"z": list(np.asarray(z, dtype=float)), "q": q, "gamma": gamma},
                      {"r_max": r_max, "quad_abserr": err}, rtol=ROUND_TOL)


def verify_lemma4(z, u, omega, s: float, h_offset: float, omega_perp=None) -> bool:
    """|z + s u + h omega| >= |(z + s u) . omega_perp| for the given, or an orthonormal pair of, omega_perp."""
    z, u, om = (np.asarray(c, dtype=float) for c in (z, u, omega))
    if abs(np.linalg.norm(om) - 1.0) > ROUND_TOL * 10:
        raise DomainError("omega must be a unit vector")
    if omega_perp is None:
        helper = np.array([1.0, 0.0, 0.0]) if abs(om[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = helper - (helper @ om) * om
        e1 /= np.linalg.norm(e1)
        perps = [e1, np.cross(om, e1)]
    else:
        e = np.asarray(omega_perp, dtype=float)
        if abs(np.linalg.norm(e) - 1.0) > ROUND_TOL * 10 or abs(e @ om) > ORTHO_TOL:
            raise DomainError("omega_perp must be a unit vector orthogonal to omega")
        perps = [e]
    w = z + s * u
    lhs = np.linalg.norm(w + h_offset * om)
    tol = ROUND_TOL * (1.0 + np.linalg.norm(w) + abs(h_offset))
    return all(lhs + tol >= abs(w @ e) for e in perps)


def lemma4_sweep(count: int = 100_000, seed: int = 0) -> BoundCheck:
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 2.0, (count, 3))
    u = rng.normal(0.0, 2.0, (count, 3))
    om = rng.standard_normal((count, 3))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    e = rng.standard_normal((count, 3))
    e -= np.sum(e * om, axis=1, keepdims=True) * om
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    s = rng.uniform(-3.0, 3.0, (count, 1))
    h = rng.uniform(-3.0, 3.0, (count, 1))
    w = z + s * u
    lhs = np.linalg.norm(w + h * om, axis=1)
    tol = ROUND_TOL * (1.0 + np.linalg.norm(w, axis=1) + np.abs(h[:, 0]))
    bad = int(np.sum(lhs + tol < np.abs(np.sum(w * e, axis=1))))
    return BoundCheck("lemma4", EstimateWithError(float(bad), 0.0, count), 0.0, {"count": count, "seed": seed})


# ---------------------------------------------------------------------------
# lemmas 5 and 6

@dataclass(frozen=True)
class LemmaScheme:
    """Engine settings for the (s, u, omega) integrals."""

    engine: str = "mc"
    samples: int = 1_000_000
    seed: int = 0
    block: int = 1 << 16
    time_nodes: int = 8
    velocity_nodes: int = 12
    velocity_radius: float = 6.0
    polar_nodes: int = 6
    azimuth_nodes: int = 12
    alpha_nodes: int = 33

    def __post_init__(self):
        if self.engine not in ("mc", "gauss"):
            raise DomainError(f"unknown engine {self.engine!r}")
        if self.samples < 2 or self.block < 1:
            raise DomainError("need at least 2 samples and a positive block size")
        if min(self.time_nodes, self.velocity_nodes, self.polar_nodes, self.azimuth_nodes, self.alpha_nodes) < 1:
            raise DomainError("node counts must be >= 1")


def alpha_function(field: ForceField, t: float, base: PhaseState | None = None,
                   nodes: int = 33) -> Callable[[np.ndarray], tuple]:
    """s -> (a1, a2, a3) arrays along the base point.

    Analytic kinds evaluate closed forms; custom fields are probed on an
    equispaced table over [0, t] and interpolated linearly.
    """
    if base is None:
        base = PhaseState(t, np.zeros(3), np.zeros(3))
    if field.analytic:
        def closed(s):
            s = np.asarray(s, dtype=float)
            al = field.alpha(s, base)
            return tuple(np.broadcast_to(np.asarray(c, dtype=float), s.shape) for c in (al.a1, al.a2, al.a3))
        return closed
    grid = np.linspace(0.0, t, max(nodes, 2))
    al = field.alpha(grid, base)
    table = [np.asarray(c, dtype=float) for c in (al.a1, al.a2, al.a3)]
    return lambda s: tuple(np.interp(np.asarray(s, dtype=float), grid, c) for c in table)


def _proposal(rng, centre, a2, q, m):
    """u ~ N(centre / a2, 1 / (2 q a2^2)) per component, with its log density."""
    sig = 1.0 / (a2 * np.sqrt(2.0 * q))
    u = centre / a2[:, None] + sig[:, None] * rng.standard_normal((m, 3))
    d = a2[:, None] * u - centre
    log_phi = 1.5 * np.log(q * a2 * a2 / np.pi) - q * np.sum(d * d, axis=1)
    return u, log_phi


def _hemisphere_draw(rng, u):
    om = rng.standard_normal(u.shape)
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    om[np.sum(om * u, axis=1) < 0] *= -1.0
    return om


def _reduced_log(sign, z1, z2, a, p, q, a1, a2, a3, u, om):
    e = sign * a
    d1 = z1 + a1[..., None] * u + (e * a2)[..., None] * om
    d2 = z2 - a2[..., None] * u - (e * a3)[..., None] * om
    return -p * np.sum(d1 * d1, axis=-1) - q * np.sum(d2 * d2, axis=-1)


def reduced_integral(kind: str, z1, z2, t: float, alpha: Callable, a: float, p: float, q: float,
                     scheme: LemmaScheme = LemmaScheme()) -> EstimateWithError:
    """The reduced loss (``kind="loss"``) or gain (``kind="gain"``) integral at (z1, z2)."""
    if kind not in ("loss", "gain"):
        raise DomainError("kind must be 'loss' or 'gain'")
    _positive(p=p, q=q)
    if t < 0 or a < 0:
        raise DomainError("t and a must be nonnegative")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    sign = 1.0 if kind == "loss" else -1.0
    if t == 0.0:
        return EstimateWithError(0.0, 0.0, 0)
    if scheme.engine == "gauss":
        return _reduced_gauss(sign, z1, z2, t, alpha, a, p, q, scheme)
    acc = MeanAccumulator()
    done, k = 0, 0
    while done < scheme.samples:
        m = min(scheme.block, scheme.samples - done)
        rng = rng_stream(scheme.seed, k)
        s = t * rng.random(m)
        a1, a2, a3 = alpha(s)
        u, log_phi = _proposal(rng, z2, a2, q, m)
        om = _hemisphere_draw(rng, u)
        logv = _reduced_log(sign, z1, z2, a, p, q, a1, a2, a3, u, om) - log_phi
        acc.add(np.abs(np.sum(u * om, axis=1)) * np.exp(logv))
        done += m
        k += 1
    return acc.estimate(t * 2.0 * np.pi)


def _reduced_gauss(sign, z1, z2, t, alpha, a, p, q, scheme):
    s_nodes, s_w = gauss_legendre(scheme.time_nodes, 0.0, t)
    total, used = 0.0, 0
    for s, ws in zip(s_nodes, s_w):
        a1, a2, a3 = (np.asarray(c, dtype=float).reshape(1) for c in alpha(np.array([s])))
        half = scheme.velocity_radius / (a2[0] * np.sqrt(q))
        u, wu = cube_rule(scheme.velocity_nodes, half, z2 / a2[0])
        live = np.linalg.norm(u, axis=1) > AXIS_EPS
        u, wu = u[live], wu[live]
        om, wo = hemisphere_nodes(u, scheme.polar_nodes, scheme.azimuth_nodes)
        B = np.einsum("ni,nmi->nm", u, om)
        logv = _reduced_log(sign, z1, z2, a, p, q, a1, a2, a3, u[:, None, :], om)
        total += ws * float(wu @ ((np.abs(B) * np.exp(logv)) @ wo))
        used += B.size
    return EstimateWithError(total, 0.0, used)


def _lemma56(kind, z1, z2, t, base, field, a, p, q, scheme, report, lhs_scale):
    alpha0, tau0 = field_constants(field, report)
    if base is None:
        base = PhaseState(t, np.zeros(3), np.zeros(3))
    alpha = alpha_function(field, t, base, scheme.alpha_nodes)
    est = reduced_integral(kind, z1, z2, t, alpha, a, p, q, scheme)
    if kind == "loss":
        bound, lemma = loss_constant(p, q, alpha0), "lemma5"
    else:
        bound, lemma = gain_constant(p, q, alpha0, a, tau0), "lemma6"
    inputs = {"z1": list(np.asarray(z1, dtype=float)), "z2": list(np.asarray(z2, dtype=float)), "t": t,
              "x": list(np.asarray(base.x, dtype=float)), "v": list(np.asarray(base.v, dtype=float)),
              "field": field.kind, "a": a, "p": p, "q": q, "alpha0": alpha0, "tau0": tau0,
              "engine": scheme.engine, "seed": scheme.seed}
    trunc = ({"velocity_radius": scheme.velocity_radius} if scheme.engine == "gauss"
             else {"velocity": "none (Gaussian proposal on R^3)"})
    check = BoundCheck(lemma, est, float(bound), inputs, trunc)
    return check.scaled(lhs_scale) if lhs_scale != 1.0 else check


def verify_lemma5(z1, z2, t: float, base: PhaseState | None = None, field: ForceField = ZeroField(),
                  a: float = 0.1, p: float = 1.0, q: float = 1.0, scheme: LemmaScheme = LemmaScheme(),
                  report: HypothesisReport | None = None, lhs_scale: float = 1.0) -> BoundCheck:
    """Reduced loss integral against its closed-form constant."""
    return _lemma56("loss", z1, z2, t, base, field, a, p, q, scheme, report, lhs_scale)


def verify_lemma6(z1, z2, t: float, base: PhaseState | None = None, field: ForceField = ZeroField(),
                  a: float = 0.1, p: float = 1.0, q: float = 1.0, scheme: LemmaScheme = LemmaScheme(),
                  report: HypothesisReport | None = None, lhs_scale: float = 1.0) -> BoundCheck:
    """Reduced gain integral against its closed-form constant."""
    return _lemma56("gain", z1, z2, t, base, field, a, p, q, scheme, report, lhs_scale)


# ---------------------------------------------------------------------------
# gain/loss integrals along characteristics

def _log_weight(state: PhaseState, p, q):
    return -p * np.sum(state.x * state.x, axis=-1) - q * np.sum(state.v * state.v, axis=-1)


def verify_gain_loss_estimates(base: PhaseState, field: ForceField = ZeroField(), a: float = 0.1,
                               p: float = 1.0, q: float = 1.0, scheme: LemmaScheme = LemmaScheme(),
                               report: HypothesisReport | None = None,
                               lhs_scale: float = 1.0) -> tuple[BoundCheck, BoundCheck]:
    """I_g / (h m) and I_l / (h m) at ``base`` against K.

    The integrands are built from the flow itself (four backward
    characteristics per sample), not from the alpha coefficients, so this is
    an independent check of the factorisation; alpha only shapes the proposal.
    """
    _positive(p=p, q=q)
    alpha0, tau0 = field_constants(field, report)
    K = estimate_constant(p, q, alpha0, a, tau0)
    t = float(base.t)
    inputs = {"t": t, "x": list(base.x), "v": list(base.v), "field": field.kind, "a": a, "p": p, "q": q,
              "alpha0": alpha0, "tau0": tau0, "seed": scheme.seed}
    if t == 0.0:
        zero = EstimateWithError(0.0, 0.0, 0)
        return BoundCheck("estimate_gain", zero, K, inputs), BoundCheck("estimate_loss", zero, K, inputs)
    alpha = alpha_function(field, t, base, scheme.alpha_nodes)
    back = field.flow(0.0, base)
    log_hm = float(_log_weight(back, p, q))
    acc_g, acc_l = MeanAccumulator(), MeanAccumulator()
    done, k = 0, 0
    while done < scheme.samples:
        m = min(scheme.block, scheme.samples - done)
        rng = rng_stream(scheme.seed, k)
        s = t * rng.random(m)
        _, a2, _ = alpha(s)
        u, log_phi = _proposal(rng, back.v, a2, q, m)
        om = _hemisphere_draw(rng, u)
        B = np.abs(np.sum(u * om, axis=1))
        start = PhaseState(t, np.broadcast_to(base.x, (m, 3)), np.broadcast_to(base.v, (m, 3)))
        at = field.flow(s, start)
        upar = np.sum(u * om, axis=1)[:, None] * om
        here = field.flow(0.0, PhaseState(s, at.x, at.v))
        partner = field.flow(0.0, PhaseState(s, at.x + a * om, at.v - u))
        first = field.flow(0.0, PhaseState(s, at.x, at.v - upar))
        second = field.flow(0.0, PhaseState(s, at.x - a * om, at.v - (u - upar)))
        log_l = _log_weight(here, p, q) + _log_weight(partner, p, q) - log_hm
        log_g = _log_weight(first, p, q) + _log_weight(second, p, q) - log_hm
        acc_l.add(B * np.exp(log_l - log_phi))
        acc_g.add(B * np.exp(log_g - log_phi))
        done += m
        k += 1
    scale = t * 2.0 * np.pi
    checks = (BoundCheck("estimate_gain", acc_g.estimate(scale), K, inputs),
              BoundCheck("estimate_loss", acc_l.estimate(scale), K, inputs))
    return tuple(c.scaled(lhs_scale) for c in checks) if lhs_scale != 1.0 else checks


# ---------------------------------------------------------------------------
# bound on the collision terms for members of M_R

def gaussian_test_field(field: ForceField, weights: WeightParams, c: float) -> Callable:
    """f(t, x, v) = c h(X(0; t, x, v)) m(V(0; t, x, v)), a member of M_R for c <= R."""
    p, q = weights.p, weights.q

    def f(t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(x.shape, v.shape)
        state = PhaseState(t, np.broadcast_to(x, shape), np.broadcast_to(v, shape))
        back = state if t == 0 else field.flow(0.0, state)
        return c * np.exp(_log_weight(back, p, q))

    return f


def verify_collision_bound(base: PhaseState, field: ForceField = ZeroField(),
                           params: CollisionParams = CollisionParams(),
                           plus: FactorModel = Constant(1.0), minus: FactorModel = Constant(1.0),
                           weights: WeightParams = WeightParams(), c: float = 0.01, R: float = 0.04,
                           scheme: QuadratureScheme = QuadratureScheme(velocity_nodes=16, polar_nodes=8,
                                                                       azimuth_nodes=16),
                           time_nodes: int = 6, report: HypothesisReport | None = None,
                           lhs_scale: float = 1.0) -> tuple[BoundCheck, BoundCheck]:
    """int_0^t |Q+-(f)#| ds <= C(R) h m ||f||^2 for the Gaussian test field of norm ``c``.

    Both sides are divided by h(X(0)) m(V(0)) ||f||^2, so the checks compare a
    dimensionless ratio with C(R) = (L(R) R + |F+(0)| + |F-(0)|) K.
    """
    if not 0 < c <= R:
        raise DomainError("need 0 < c <= R so that the test field lies in M_R")
    p, q = weights.p, weights.q
    alpha0, tau0 = field_constants(field, report)
    K = estimate_constant(p, q, alpha0, params.a, tau0)
    L0 = max(lipschitz_estimate(m, R, q=q, alpha0=alpha0) for m in (plus, minus))
    L = norm_lipschitz(L0, q, alpha0)
    C = (L * R + abs(plus.at_zero()) + abs(minus.at_zero())) * K
    f = gaussian_test_field(field, weights, c)
    t = float(base.t)
    back = field.flow(0.0, base)
    norm_hm = np.exp(float(_log_weight(back, p, q))) * c * c
    lhs_g = lhs_l = 0.0
    if t > 0:
        for s, w in zip(*gauss_legendre(time_nodes, 0.0, t)):
            at = field.flow(s, base)
            lhs_g += w * abs(gain(f, plus, s, at.x, at.v, params, scheme))
            lhs_l += w * abs(loss(f, minus, s, at.x, at.v, params, scheme))
    inputs = {"t": t, "x": list(base.x), "v": list(base.v), "field": field.kind, "a": params.a,
              "c": c, "R": R, "L": L, "K": K}
    trunc = {"velocity_radius": scheme.velocity_radius}
    checks = (BoundCheck("collision_gain", EstimateWithError(lhs_g / norm_hm), float(C), inputs, trunc),
              BoundCheck("collision_loss", EstimateWithError(lhs_l / norm_hm), float(C), inputs, trunc))
    return tuple(ch.scaled(lhs_scale) for ch in checks) if lhs_scale != 1.0 else checks


def verify_derivative_identity(field: ForceField, base: PhaseState, tol: float = 1e-6) -> BoundCheck:
    """dX(0)/dx and dV(0)/dv both equal a2(t) times the identity."""
    dX, dV, a2 = derivative_identity(field, base)
    dev = max(np.max(np.abs(dX - a2 * np.eye(3))), np.max(np.abs(dV - a2 * np.eye(3))))
    inputs = {"t": float(base.t), "x": list(base.x), "v": list(base.v), "field": field.kind, "a2": a2}
    return BoundCheck("derivative", EstimateWithError(float(dev)), tol, inputs)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_KINDS = ("lemma1", "lemma2", "lemma3", "lemma4", "lemma5", "lemma6", "estimate",
               "collision_bound", "derivative")


@dataclass(frozen=True)
class Sweep:
    """A batch of seeded random checks of one kind."""

    lemma: str
    count: int = 100
    seed: int = 0
    a: float = 0.1
    p: float = 1.0
    q: float = 1.0
    t_max: float = 1.0
    samples: int = 100_000
    engine: str = "mc"

    def __post_init__(self):
        if self.lemma not in SWEEP_KINDS:
            raise DomainError(f"unknown sweep kind {self.lemma!r}")
        if self.count < 0:
            raise DomainError("sweep count must be nonnegative")
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        _positive(p=self.p, q=self.q)

    def scheme(self, index: int) -> LemmaScheme:
        return LemmaScheme(engine=self.engine, samples=self.samples, seed=self.seed * 1_000_003 + index)


def _draws(sweep: Sweep):
    rng = np.random.default_rng(sweep.seed)
    n = sweep.count
    return {
        "z1": rng.normal(0.0, 1.5, (n, 3)), "z2": rng.normal(0.0, 1.5, (n, 3)),
        "t": rng.uniform(0.1, sweep.t_max, n) if sweep.t_max > 0.1 else np.full(n, sweep.t_max),
        "x": rng.uniform(-2.0, 2.0, (n, 3)), "v": rng.uniform(-2.0, 2.0, (n, 3)),
        "z": rng.uniform(-5.0, 5.0, n), "u": rng.choice([-1.0, 1.0], n) * np.exp(rng.uniform(np.log(0.01), np.log(10.0), n)),
        "p": np.exp(rng.uniform(np.log(0.1), np.log(10.0), n)),
        "zvec": rng.uniform(-3.0, 3.0, (n, 3)), "qv": np.exp(rng.uniform(0.0, np.log(10.0), n)),
        "gamma": rng.uniform(-1.9, 1.0, n),
    }


def run_sweep(sweep: Sweep, field: ForceField = ZeroField(), report: HypothesisReport | None = None,
              lhs_scale: float = 1.0, workers: int = 1, plus: FactorModel = Constant(1.0),
              minus: FactorModel = Constant(1.0)) -> list:
    """All checks of one sweep, in draw order regardless of ``workers``."""
    if sweep.lemma == "lemma1":
        return [lemma1_sweep(sweep.count, sweep.seed)] if sweep.count else []
    if sweep.lemma == "lemma4":
        return [lemma4_sweep(sweep.count, sweep.seed)] if sweep.count else []
    if sweep.count == 0:
        return []
    if not field.analytic and report is None:
        report = check_hypotheses(field, SampleSpec(count=200, seed=sweep.seed))
    d = _draws(sweep)

    def one(i):
        base = PhaseState(float(d["t"][i]), d["x"][i], d["v"][i])
        if sweep.lemma == "lemma2":
            return [verify_lemma2(float(d["z"][i]), float(d["u"][i]), float(d["p"][i]))]
        if sweep.lemma == "lemma3":
            return [verify_lemma3(d["zvec"][i], float(d["qv"][i]), float(d["gamma"][i]))]
        if sweep.lemma in ("lemma5", "lemma6"):
            fn = verify_lemma5 if sweep.lemma == "lemma5" else verify_lemma6
            return [fn(d["z1"][i], d["z2"][i], base.t, base, field, sweep.a, sweep.p, sweep.q,
                       sweep.scheme(i), report)]
        if sweep.lemma == "estimate":
            return list(verify_gain_loss_estimates(base, field, sweep.a, sweep.p, sweep.q, sweep.scheme(i), report))
        if sweep.lemma == "collision_bound":
            return list(verify_collision_bound(base, field, CollisionParams(a=sweep.a), plus, minus,
                                               WeightParams(sweep.p, sweep.q), report=report))
        return [verify_derivative_identity(field, base)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(one, range(sweep.count)))
    else:
        groups = [one(i) for i in range(sweep.count)]
    checks = [c for g in groups for c in g]
    return [c.scaled(lhs_scale) for c in checks] if lhs_scale != 1.0 else checks


def run_sweeps(sweeps, field: ForceField = ZeroField(), report: HypothesisReport | None = None,
               lhs_scale: float = 1.0, workers: int = 1, **models) -> VerificationReport:
    out = VerificationReport()
    for sw in sweeps:
        out.checks.extend(run_sweep(sw, field, report, lhs_scale, workers, **models))
    return out


DEFAULT_SWEEPS = (
    Sweep("lemma1", count=100_000),
    Sweep("lemma2", count=1000),
    Sweep("lemma3", count=1000),
    Sweep("lemma4", count=100_000),
    Sweep("lemma5", count=20, samples=100_000),
    Sweep("lemma6", count=20, samples=100_000),
    Sweep("estimate", count=20, samples=50_000),
    Sweep("derivative", count=20),
)
