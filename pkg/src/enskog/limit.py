"""The a -> 0 limit: how far the Enskog operator is from the Boltzmann one.

On a Gaussian test field f = c h(x) exp(-q sum_i k_i v_i^2) with k_i >= 1
(anisotropic by default, so f is not a Maxwellian and Q_0(f) != 0) the pointwise difference
Q_a(f) - Q_0(f) is measured at seeded sample points in the weighted sup
(divided by h m), for each diameter in a sweep, and a log-log slope is fitted
over the positive diameters.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .collision import CollisionParams, Constant, FactorModel, StandardYApprox, boltzmann_collision, gain, loss
from .errors import DomainError
from .quadrature import QuadratureScheme
from .weighted import WeightParams

LIMIT_SCHEME = QuadratureScheme(velocity_nodes=16, polar_nodes=8, azimuth_nodes=16)


def _models(name: str, a: float, mass: float) -> tuple[FactorModel, FactorModel]:
    if name == "constant":
        return Constant(1.0), Constant(1.0)
    if name == "standard_y":
        # a = 0 has no excluded volume: Y = 1
        m = StandardYApprox.from_diameter(a, mass) if a > 0 else Constant(1.0)
        return m, m
    raise DomainError(f"unknown factor family {name!r}")


@dataclass
class LimitTable:
    a_values: list
    differences: dict                  # factor family -> weighted sup per a
    slopes: dict                       # factor family -> fitted order in a
    reference_gap: float               # max weighted |Q_0 - independent Boltzmann operator|
    points: int
    amplitude: float
    notes: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {"a_values": list(self.a_values), "differences": {k: list(v) for k, v in self.differences.items()},
                "slopes": dict(self.slopes), "reference_gap": self.reference_gap, "points": self.points,
                "amplitude": self.amplitude, "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d: dict) -> "LimitTable":
        return cls(list(d["a_values"]), {k: list(v) for k, v in d["differences"].items()}, dict(d["slopes"]),
                   float(d["reference_gap"]), int(d["points"]), float(d["amplitude"]), list(d["notes"]))

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "LimitTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write_csv(self, path) -> None:
        fams = sorted(self.differences)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a"] + fams)
            for i, a in enumerate(self.a_values):
                w.writerow([repr(float(a))] + [repr(float(self.differences[f][i])) for f in fams])


def fit_order(a_values, differences) -> float:
    """Least-squares slope of log(difference) against log(a) over a > 0."""
    a = np.asarray(a_values, dtype=float)
    d = np.asarray(differences, dtype=float)
    keep = (a > 0) & (d > 0)
    if keep.sum() < 2:
        raise DomainError("need at least two positive diameters with nonzero differences")
    return float(np.polyfit(np.log(a[keep]), np.log(d[keep]), 1)[0])


def boltzmann_limit_study(a_values=(0.2, 0.1, 0.05, 0.0), points: int = 12, amplitude: float = 1.0,
                          weights: WeightParams = WeightParams(), families=("constant",), seed: int = 0,
                          mass: float = 1.0, anisotropy=(1.0, 1.5, 2.0),
                          scheme: QuadratureScheme = LIMIT_SCHEME) -> LimitTable:
    a_values = [float(a) for a in a_values]
    if any(a < 0 for a in a_values):
        raise DomainError("diameters must be nonnegative")
    if 0.0 not in a_values:
        raise DomainError("the diameter sweep must include 0")
    if points < 1 or not amplitude > 0:
        raise DomainError("need at least one point and a positive amplitude")
    p, q = weights.p, weights.q
    k = np.asarray(anisotropy, dtype=float)
    if k.shape != (3,) or np.any(k < 1.0):
        raise DomainError("anisotropy factors must be three numbers >= 1 (keeps f in the weighted space)")

    def f(t, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return amplitude * np.exp(-p * np.sum(x * x, axis=-1) - q * np.sum(k * v * v, axis=-1))

    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 1.0, (points, 3)) / np.sqrt(p)
    vs = rng.normal(0.0, 0.7, (points, 3)) / np.sqrt(q)
    inv_w = np.exp(p * np.sum(xs**2, axis=1) + q * np.sum(vs**2, axis=1))

    def Q(a, fam, x, v):
        params = CollisionParams(a=a, mass=mass, boltzmann_limit=(a == 0.0))
        plus, minus = _models(fam, a, mass)
        return gain(f, plus, 0.0, x, v, params, scheme) - loss(f, minus, 0.0, x, v, params, scheme)

    diffs, slopes = {}, {}
    ref_gap = 0.0
    for fam in families:
        base = np.array([Q(0.0, fam, x, v) for x, v in zip(xs, vs)])
        if fam == "constant":
            indep = np.array([boltzmann_collision(f, 0.0, x, v, scheme) for x, v in zip(xs, vs)])
            ref_gap = float(np.max(np.abs(base - indep) * inv_w))
        row = []
        for a in a_values:
            if a == 0.0:
                row.append(0.0)
                continue
            vals = np.array([Q(a, fam, x, v) for x, v in zip(xs, vs)])
            row.append(float(np.max(np.abs(vals - base) * inv_w)))
        diffs[fam] = row
        slopes[fam] = fit_order(a_values, row)
    return LimitTable(a_values, diffs, slopes, ref_gap, points, amplitude)
