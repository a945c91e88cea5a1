"""Experiment configuration: a YAML tree with a fixed schema.

Unknown keys anywhere in the tree are errors, so a misspelt quadrature
parameter cannot silently fall back to its default.  Every section is
optional; missing keys take the library defaults.

Schema (defaults shown)::

    seed: 0
    force:      {kind: zero}            # zero | time_only | linear_plus_time | custom
                                        # e0: 1.0, E0: [expr, expr, expr]  (t and constants)
                                        # E: [expr, expr, expr] (custom; x1 x2 x3 t constants)
                                        # step: 1.0e-3, order: 4
    hypotheses: {count: 1000, seed: 0, s_range: [0, 1], t_range: [0, 1],
                 x_range: [-2, 2], v_range: [-2, 2], tau0_bound: null, alpha0_bound: null}
    collision:  {a: 0.1, mass: 1.0, boltzmann_limit: false, factor_at_contact: false,
                 strict_stencil: false}
    factors:    {plus: {kind: constant, c: 1.0}, minus: {kind: constant, c: 1.0}}
                # kinds: constant, revised_constant_g (c), standard_y (b or from the diameter),
                #        virial (coefficients, diameter)
    weights:    {p: 1.0, q: 1.0}
    grid:       {T: 1.0, K: 8, n_x: 9, n_v: 9}
    rule:       {sphere_polar: 4, sphere_azimuth: 8, ..., time_nodes: 2}
    initial:    {amplitude: 0.01, p: null, q: null}    # f0 = A exp(-p|x|^2 - q|v|^2)
    solve:      {R: null, tol: 1.0e-6, max_iter: 20, norm_floor: 1.0e-16,
                 tilt: null}              # null: q for zero/time_only fields, else 0
    sweeps:     [{lemma: lemma2, count: 1000, ...}, ...]   # absent: the default sweep set
    verify:     {lhs_scale: 1.0}
    boltzmann:  {a_values: [0.2, 0.1, 0.05, 0.0], points: 12, amplitude: 1.0,
                 families: [constant], anisotropy: [1.0, 1.5, 2.0]}
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable

import numpy as np
import yaml

from .collision import CollisionParams, Constant, FactorModel, RevisedConstantG, StandardYApprox, VirialTruncated
from .errors import ConfigError, EnskogError
from .forces import (
    ForceField, LinearPlusTimeField, SampleSpec, TimeOnlyField, ZeroField, affine_time_force,
    custom_field_from_expressions,
)
from .grid_collision import GridRule
from .lemmas import DEFAULT_SWEEPS, Sweep
from .weighted import GridSpec, WeightParams

SECTIONS = ("seed", "force", "hypotheses", "collision", "factors", "weights", "grid", "rule", "initial",
            "solve", "sweeps", "verify", "boltzmann")


def _section(tree: dict, name: str) -> dict:
    val = tree.get(name) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return val


def _only(d: dict, allowed, where: str) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {where}")


def _build(cls, d: dict, where: str, convert: dict | None = None):
    names = [f.name for f in dataclasses.fields(cls)]
    _only(d, names, where)
    kwargs = dict(d)
    for k, fn in (convert or {}).items():
        if k in kwargs:
            kwargs[k] = fn(kwargs[k])
    try:
        return cls(**kwargs)
    except (EnskogError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _tuple(v):
    return tuple(v)


def parse_force(d: dict) -> ForceField:
    kind = d.get("kind", "zero")
    allowed = {"zero": ("kind",), "time_only": ("kind", "E0"), "linear_plus_time": ("kind", "e0", "E0"),
               "custom": ("kind", "E", "step", "order")}
    if kind not in allowed:
        raise ConfigError(f"unknown force kind {kind!r}")
    _only(d, allowed[kind], "force")
    try:
        if kind == "zero":
            return ZeroField()
        E0 = affine_time_force(d["E0"]) if "E0" in d else None
        if kind == "time_only":
            return TimeOnlyField(E0)
        if kind == "linear_plus_time":
            return LinearPlusTimeField(float(d.get("e0", 1.0)), E0)
        if "E" not in d:
            raise ConfigError("custom force needs E: [expr, expr, expr]")
        return custom_field_from_expressions(d["E"], float(d.get("step", 1e-3)), int(d.get("order", 4)))
    except ConfigError:
        raise
    except (EnskogError, TypeError, ValueError) as exc:
        raise ConfigError(f"force: {exc}") from exc


def parse_factor(d: dict, collision: CollisionParams, where: str) -> FactorModel:
    kind = d.get("kind", "constant")
    allowed = {"constant": ("kind", "c"), "revised_constant_g": ("kind", "c"), "standard_y": ("kind", "b"),
               "virial": ("kind", "coefficients", "diameter")}
    if kind not in allowed:
        raise ConfigError(f"unknown factor kind {kind!r} in {where}")
    _only(d, allowed[kind], where)
    try:
        if kind == "constant":
            return Constant(float(d.get("c", 1.0)))
        if kind == "revised_constant_g":
            return RevisedConstantG(float(d.get("c", 1.0)))
        if kind == "standard_y":
            if "b" in d:
                return StandardYApprox(float(d["b"]))
            return StandardYApprox.from_diameter(collision.a, collision.mass)
        return VirialTruncated(tuple(d.get("coefficients", ())), float(d.get("diameter", collision.a)))
    except (EnskogError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class InitialSpec:
    amplitude: float = 0.01
    p: float | None = None
    q: float | None = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("initial amplitude must be nonnegative")
        for k in ("p", "q"):
            v = getattr(self, k)
            if v is not None and not v > 0:
                raise ConfigError(f"initial {k} must be positive")

    def function(self, weights: WeightParams) -> Callable:
        A = self.amplitude
        p = weights.p if self.p is None else self.p
        q = weights.q if self.q is None else self.q
        return lambda x, v: A * np.exp(-p * np.sum(x * x, axis=-1) - q * np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class SolveSpec:
    R: float | None = None
    tol: float = 1e-6
    max_iter: int = 20
    norm_floor: float = 1e-16
    tilt: float | None = None


@dataclass(frozen=True)
class GridConfig:
    T: float = 1.0
    K: int = 8
    n_x: int = 9
    n_v: int = 9

    def __post_init__(self):
        if not self.T > 0 or self.K < 2:
            raise ConfigError("grid needs T > 0 and K >= 2 knots")


@dataclass(frozen=True)
class BoltzmannSpec:
    a_values: tuple = (0.2, 0.1, 0.05, 0.0)
    points: int = 12
    amplitude: float = 1.0
    families: tuple = ("constant",)
    anisotropy: tuple = (1.0, 1.5, 2.0)

    def __post_init__(self):
        a = [float(x) for x in self.a_values]
        if any(x < 0 for x in a) or 0.0 not in a:
            raise ConfigError("boltzmann a_values must be nonnegative and include 0")
        if self.points < 1 or not self.amplitude > 0:
            raise ConfigError("boltzmann needs points >= 1 and a positive amplitude")
        if len(self.anisotropy) != 3 or any(float(x) < 1.0 for x in self.anisotropy):
            raise ConfigError("boltzmann anisotropy must be three numbers >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    force: ForceField = ZeroField()
    hypotheses: SampleSpec = SampleSpec()
    collision: CollisionParams = CollisionParams()
    plus: FactorModel = Constant(1.0)
    minus: FactorModel = Constant(1.0)
    weights: WeightParams = WeightParams()
    grid: GridConfig = GridConfig()
    rule: GridRule = GridRule()
    initial: InitialSpec = InitialSpec()
    solve: SolveSpec = SolveSpec()
    sweeps: tuple = DEFAULT_SWEEPS
    lhs_scale: float = 1.0
    boltzmann: BoltzmannSpec = BoltzmannSpec()
    source: dict = dc_field(default_factory=dict, compare=False)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec.desk(self.weights, g.T, g.K, g.n_x, g.n_v)

    def with_overrides(self, seed: int | None = None, strict_stencil: bool = False) -> "ExperimentConfig":
        out = self
        if seed is not None:
            out = dataclasses.replace(out, seed=int(seed),
                                      sweeps=tuple(dataclasses.replace(s, seed=s.seed + int(seed)) for s in out.sweeps),
                                      hypotheses=dataclasses.replace(out.hypotheses, seed=int(seed)))
        if strict_stencil:
            out = dataclasses.replace(out, collision=dataclasses.replace(out.collision, strict_stencil=True))
        return out


def parse_config(tree: dict | None) -> ExperimentConfig:
    tree = tree or {}
    if not isinstance(tree, dict):
        raise ConfigError("configuration root must be a mapping")
    _only(tree, SECTIONS, "configuration root")
    seed = tree.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    force = parse_force(_section(tree, "force"))
    hyp = _build(SampleSpec, _section(tree, "hypotheses"), "hypotheses",
                 {"s_range": _tuple, "t_range": _tuple, "x_range": _tuple, "v_range": _tuple})
    coll = _build(CollisionParams, _section(tree, "collision"), "collision")
    factors = _section(tree, "factors")
    _only(factors, ("plus", "minus"), "factors")
    plus = parse_factor(factors.get("plus") or {}, coll, "factors.plus")
    minus = parse_factor(factors.get("minus") or {}, coll, "factors.minus")
    weights = _build(WeightParams, _section(tree, "weights"), "weights")
    grid = _build(GridConfig, _section(tree, "grid"), "grid")
    rule = _build(GridRule, _section(tree, "rule"), "rule")
    initial = _build(InitialSpec, _section(tree, "initial"), "initial")
    solve = _build(SolveSpec, _section(tree, "solve"), "solve")
    if not solve.tol > 0 or solve.max_iter < 1 or (solve.R is not None and not solve.R > 0) \
            or not 0.0 <= solve.norm_floor < 1.0 or (solve.tilt is not None and solve.tilt < 0):
        raise ConfigError("solve needs tol > 0, max_iter >= 1, R > 0 (if set), 0 <= norm_floor < 1 and tilt >= 0")
    if "sweeps" in tree:
        raw = tree["sweeps"] or []
        if not isinstance(raw, list):
            raise ConfigError("sweeps must be a list")
        sweeps = tuple(_build(Sweep, s if isinstance(s, dict) else {}, f"sweeps[{i}]") for i, s in enumerate(raw))
    else:
        sweeps = DEFAULT_SWEEPS
    verify = _section(tree, "verify")
    _only(verify, ("lhs_scale",), "verify")
    lhs_scale = float(verify.get("lhs_scale", 1.0))
    bz = _build(BoltzmannSpec, _section(tree, "boltzmann"), "boltzmann",
                {"a_values": _tuple, "families": _tuple, "anisotropy": _tuple})
    return ExperimentConfig(seed, force, hyp, coll, plus, minus, weights, grid, rule, initial, solve,
                            sweeps, lhs_scale, bz, dict(tree))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            tree: Any = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return parse_config(tree)
