"""Mild-solution operator J on a grid, Picard iteration and contraction diagnostics.

J(f)(t, x, v) = f0(X(0), V(0)) + int_0^t Q(f)(s, X(s), V(s)) ds

The collision term is computed on every grid node by
:class:`~enskog.grid_collision.GridCollisionOperator` and then read off along
each backward characteristic.  Along a characteristic the weight
h(X(0)) m(V(0)) is constant, so what gets interpolated is the ratio
Q / (h m), as the hm-weighted average of its corner values (interpolated Q
over interpolated h m).  This keeps the coarse position grid from inflating
Gaussian tails, and corners whose weight is negligible cannot dominate.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .collision import CollisionParams, Constant, FactorModel, boltzmann_collision
from .errors import DomainError
from .forces import ForceField, PhaseState
from .grid_collision import GridCollisionOperator, GridRule
from .quadrature import QuadratureScheme, gauss_legendre
from .weighted import (
    DistributionField, GridSpec, WeightParams, comparison_initial_norm, multilinear_stencil,
    node_log_weights, weighted_abs,
)

NONCONTRACTION_RUN = 3
NORM_FLOOR = 1e-16
TILT_KINDS = ("zero", "time_only")


class NonContractionWarning(RuntimeWarning):
    """Residual ratios stayed at or above 1 for several consecutive iterations."""


class SmallnessWarning(RuntimeWarning):
    """The initial data is larger than R/2."""


@dataclass(frozen=True)
class SolveConfig:
    field: ForceField
    params: CollisionParams
    plus: FactorModel
    minus: FactorModel
    weights: WeightParams
    f0: Callable
    grid: GridSpec | None = None
    rule: GridRule = GridRule()
    max_iter: int = 20
    tol: float = 1e-6
    R: float | None = None
    norm_floor: float = NORM_FLOOR
    tilt: float | None = None

    def __post_init__(self):
        if self.tilt is not None and self.tilt < 0:
            raise DomainError("tilt must be nonnegative")
        if not 0.0 <= self.norm_floor < 1.0:
            raise DomainError("norm_floor must lie in [0, 1)")
        if not self.tol > 0:
            raise DomainError("tolerance must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if self.R is not None and not self.R > 0:
            raise DomainError("R must be positive")
        if self.grid is None:
            object.__setattr__(self, "grid", GridSpec.desk(self.weights))


@dataclass
class IterationReport:
    residuals: list = dc_field(default_factory=list)
    norms: list = dc_field(default_factory=list)
    min_values: list = dc_field(default_factory=list)
    clamps: list = dc_field(default_factory=list)
    full_residuals: list = dc_field(default_factory=list)
    converged: bool = False
    non_contraction: bool = False
    R: float = 0.0
    initial_norm: float = 0.0
    tol: float = 0.0
    notes: list = dc_field(default_factory=list)
    norm_floor: float = 0.0
    resolved_fraction: float = 1.0

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def ratios(self) -> list:
        out = []
        for prev, cur in zip(self.residuals, self.residuals[1:]):
            if prev > 0:
                out.append(cur / prev)
            else:
                out.append(0.0 if cur == 0 else float("inf"))
        return out

    @property
    def max_clamp(self) -> float:
        return max(self.clamps, default=0.0)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "non_contraction": self.non_contraction,
            "R": self.R,
            "initial_norm": self.initial_norm,
            "tolerance": self.tol,
            "residuals": list(self.residuals),
            "norms": list(self.norms),
            "min_values": list(self.min_values),
            "clamps": list(self.clamps),
            "full_residuals": list(self.full_residuals),
            "norm_floor": self.norm_floor,
            "resolved_fraction": self.resolved_fraction,
            "ratios": self.ratios,
            "max_clamp": self.max_clamp,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationReport":
        return cls(list(d["residuals"]), list(d["norms"]), list(d["min_values"]), list(d["clamps"]),
                   list(d.get("full_residuals", [])), bool(d["converged"]), bool(d["non_contraction"]),
                   float(d["R"]), float(d["initial_norm"]), float(d["tolerance"]), list(d["notes"]),
                   float(d.get("norm_floor", 0.0)), float(d.get("resolved_fraction", 1.0)))

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "IterationReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write_csv(self, path) -> None:
        ratios = [""] + [repr(r) for r in self.ratios]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "residual", "norm", "min_value", "clamp", "ratio", "full_residual"])
            full = self.full_residuals or [float("nan")] * self.iterations
            rows = zip(self.residuals, self.norms, self.min_values, self.clamps, ratios, full)
            for i, row in enumerate(rows, 1):
                w.writerow([i] + [c if isinstance(c, str) else repr(float(c)) for c in row])


def read_residual_csv(path) -> list:
    with open(path) as fh:
        return [float(r["residual"]) for r in csv.DictReader(fh)]


def contraction_summary(report: IterationReport) -> float:
    """Median of the residual ratios."""
    if report.iterations < 3:
        raise DomainError("contraction summary needs at least 3 recorded iterations")
    return float(np.median(report.ratios))


# ---------------------------------------------------------------------------
# operators

def free_streaming(f0: Callable, field: ForceField, grid: GridSpec) -> DistributionField:
    """Values f0(X(0; t, x, v), V(0; t, x, v)) at every node."""
    xs, vs = grid.phase_nodes()
    vals = np.empty(grid.shape)
    for k, t in enumerate(grid.t_knots):
        if t == 0.0:
            X0, V0 = xs, vs
        else:
            back = field.flow(0.0, PhaseState(t, xs, vs))
            X0, V0 = back.x, back.v
        vals[k] = np.asarray(f0(X0, V0), dtype=float).reshape(grid.shape[1:])
    return DistributionField(grid, vals)


def time_nodes(grid: GridSpec, k: int, per_interval: int):
    """Gauss nodes on every knot interval of [t_0, t_k]."""
    if k == 0:
        return np.empty(0), np.empty(0)
    knots = grid.t_knots
    parts = [gauss_legendre(per_interval, knots[i], knots[i + 1]) for i in range(k)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def velocity_tilt(config: SolveConfig) -> float:
    """Gaussian tilt for the velocity maps: q where f / m(v) is smooth, else 0.

    For fields whose backward velocity map is v minus a function of t, a
    Gaussian initial datum stays proportional to m(v) in v, so the tilt makes
    the velocity integrals exact for it.  Under a position-dependent force
    f / m(v) can grow by many orders of magnitude across the box, and
    interpolating it would amplify that, so no tilt is used.
    """
    if config.tilt is not None:
        return float(config.tilt)
    return config.weights.q if config.field.kind in TILT_KINDS else 0.0


@dataclass
class JStats:
    clamp: float
    min_value: float


class MildOperator:
    """J for one configuration; caches the free-streaming lift and the node weights.

    :meth:`norm` and :meth:`distance` take the weighted maximum over the
    resolved nodes, those with h(X(0)) m(V(0)) >= ``norm_floor``.  Far out in
    the Gaussian tails a coarse grid cannot represent f / (h m), and that
    discretisation noise would otherwise dominate every weighted maximum.
    The ``full_*`` variants use every node.
    """

    def __init__(self, config: SolveConfig):
        self.config = config
        self.grid = config.grid
        self.lift = free_streaming(config.f0, config.field, self.grid)
        self.log_w = node_log_weights(self.grid, config.field, config.weights)
        self.hm = np.exp(-self.log_w)
        floor = config.norm_floor
        self.resolved = self.log_w <= -np.log(floor) if floor > 0 else np.ones(self.grid.shape, dtype=bool)
        self.collision = GridCollisionOperator(self.grid, config.params, config.plus, config.minus, config.rule,
                                               tilt=velocity_tilt(config))
        self.silent = all(isinstance(m, Constant) and m.c == 0.0 for m in (config.plus, config.minus))
        self.last = JStats(0.0, float(np.min(self.lift.values)))

    def collision_integral(self, f: DistributionField) -> np.ndarray:
        """int_0^t Q(f)# ds at every node (zero on the first knot)."""
        g = self.grid
        out = np.zeros(g.shape)
        if self.silent:
            return out
        Qflat = self.collision(f).reshape(-1)
        hm_flat = self.hm.reshape(-1)
        xs, vs = g.phase_nodes()
        for k in range(1, len(g.t_knots)):
            t = g.t_knots[k]
            s_nodes, s_w = time_nodes(g, k, self.config.rule.time_nodes)
            acc = np.zeros(xs.shape[0])
            for s, w in zip(s_nodes, s_w):
                at = self.config.field.flow(s, PhaseState(t, xs, vs))
                coords = ([np.full(xs.shape[0], g.time_coordinate(s))]
                          + [g.x_coordinate(at.x[:, i]) for i in range(3)]
                          + [g.v_coordinate(at.v[:, i]) for i in range(3)])
                corners, inside = multilinear_stencil(g.shape, coords)
                num = np.zeros(xs.shape[0])
                den = np.zeros(xs.shape[0])
                for idx, wt in corners:
                    num += wt * Qflat[idx]
                    den += wt * hm_flat[idx]
                # hm-weighted average of the corner ratios Q / (h m)
                ok = inside & (den > 0)
                val = np.zeros(xs.shape[0])
                val[ok] = num[ok] / den[ok]
                acc += w * val
            out[k] = (acc * self.hm[k].reshape(-1)).reshape(g.shape[1:])
        return out

    def __call__(self, f: DistributionField) -> DistributionField:
        if f.grid != self.grid:
            raise DomainError("iterate lives on a different grid")
        vals = self.lift.values + self.collision_integral(f)
        vals[0] = self.lift.values[0]
        low = float(np.min(vals))
        clamp = max(0.0, -low)
        if clamp > 0:
            vals = np.maximum(vals, 0.0)
        self.last = JStats(clamp, low)
        return DistributionField(self.grid, vals)

    def norm(self, f: DistributionField) -> float:
        return float(np.max(weighted_abs(f.values[self.resolved], self.log_w[self.resolved])))

    def distance(self, f: DistributionField, g: DistributionField) -> float:
        diff = f.values[self.resolved] - g.values[self.resolved]
        return float(np.max(weighted_abs(diff, self.log_w[self.resolved])))

    def full_norm(self, f: DistributionField) -> float:
        return float(np.max(weighted_abs(f.values, self.log_w)))

    def full_distance(self, f: DistributionField, g: DistributionField) -> float:
        return float(np.max(weighted_abs(f.values - g.values, self.log_w)))


def apply_J(f: DistributionField, config: SolveConfig, operator: MildOperator | None = None) -> DistributionField:
    return (operator or MildOperator(config))(f)


def solve(config: SolveConfig, start: DistributionField | None = None,
          operator: MildOperator | None = None) -> tuple[DistributionField, IterationReport]:
    """Picard iteration f_{n+1} = J(f_n) from the free-streaming lift (or ``start``)."""
    op = operator or MildOperator(config)
    init = comparison_initial_norm(config.f0, config.weights, config.grid)
    R = config.R if config.R is not None else 4.0 * init
    report = IterationReport(R=float(R), initial_norm=init, tol=config.tol, norm_floor=config.norm_floor,
                             resolved_fraction=float(np.mean(op.resolved)))
    if R > 0 and init > R / 2:
        msg = f"initial norm {init:.3e} exceeds R/2 = {R / 2:.3e}; proceeding"
        warnings.warn(msg, SmallnessWarning, stacklevel=2)
        report.notes.append(msg)
    f = start if start is not None else op.lift
    streak = 0
    for _ in range(config.max_iter):
        g = op(f)
        res = op.distance(g, f)
        report.residuals.append(res)
        report.full_residuals.append(op.full_distance(g, f))
        report.norms.append(op.norm(g))
        report.min_values.append(op.last.min_value)
        report.clamps.append(op.last.clamp)
        ratios = report.ratios
        streak = streak + 1 if ratios and ratios[-1] >= 1.0 else 0
        if streak >= NONCONTRACTION_RUN and not report.non_contraction:
            report.non_contraction = True
            warnings.warn("residual ratios >= 1 for 3 consecutive iterations", NonContractionWarning, stacklevel=2)
            report.notes.append("NonContraction")
        f = g
        if res <= config.tol:
            report.converged = True
            break
    if not report.converged:
        report.notes.append("NonConvergence")
    return f, report


def a_priori_bound(R: float, L: float, plus: FactorModel, minus: FactorModel, K: float) -> float:
    """R/2 + 2 C(R) R^2 with C(R) = (L R + |F+(0)| + |F-(0)|) K."""
    C = (L * R + abs(plus.at_zero()) + abs(minus.at_zero())) * K
    return R / 2.0 + 2.0 * C * R**2


# ---------------------------------------------------------------------------
# independent reference for the a = 0 limit

def boltzmann_mild_reference(f: DistributionField, config: SolveConfig, node: tuple,
                             scheme: QuadratureScheme = QuadratureScheme()) -> float:
    """J(f) at one grid node with the classical Boltzmann operator, evaluated pointwise."""
    g = config.grid
    k = node[0]
    t = g.t_knots[k]
    x = g.x_axis[list(node[1:4])]
    v = g.v_axis[list(node[4:7])]
    base = PhaseState(t, x, v)
    back = config.field.flow(0.0, base)
    value = float(config.f0(back.x, back.v))
    s_nodes, s_w = time_nodes(g, k, config.rule.time_nodes)
    for s, w in zip(s_nodes, s_w):
        at = config.field.flow(s, base)
        value += w * boltzmann_collision(f, s, at.x, at.v, scheme)
    return value
