"""Picard iteration on a small grid under both analytic fields, with a uniqueness restart."""
import numpy as np

from enskog.collision import CollisionParams, Constant
from enskog.forces import LinearPlusTimeField, ZeroField
from enskog.picard import MildOperator, SolveConfig, solve
from enskog.weighted import GridSpec, WeightParams

grid = GridSpec((0.0, 0.5, 1.0), 6.0, 7, 4.0, 7)
w = WeightParams()


def f0(x, v):
    return 0.01 * np.exp(-np.sum(x * x, axis=-1) - np.sum(v * v, axis=-1))


for field in (ZeroField(), LinearPlusTimeField(1.0)):
    cfg = SolveConfig(field, CollisionParams(a=0.1), Constant(1.0), Constant(1.0), w, f0, grid)
    op = MildOperator(cfg)
    f, rep = solve(cfg, operator=op)
    bumped = f.with_values(f.values * (1.0 + 0.1 * np.random.default_rng(0).uniform(-1, 1, f.values.shape)))
    g, _ = solve(cfg, start=bumped, operator=op)
    print(f"{field.kind:17s} residuals {['%.1e' % r for r in rep.residuals]}  "
          f"restart gap {op.distance(f, g):.1e}  clamp {rep.max_clamp:.1e}")
