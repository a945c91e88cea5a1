"""Gaussian weights, the weighted sup-norm and gridded distribution fields."""
from __future__ import annotations

import csv
import json
import struct
import sys
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import DomainError
from .forces import ForceField, PhaseState

MAGIC = b"ENSKDF01"
EXP_SAFE = 700.0


@dataclass(frozen=True)
class WeightParams:
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise DomainError("weight parameters p and q must be positive")


def weight_h(x, p: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-p * np.sum(x * x, axis=-1))


def weight_m(v, q: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.exp(-q * np.sum(v * v, axis=-1))


def log_inverse_weight(X0, V0, params: WeightParams) -> np.ndarray:
    """log(1 / (h(X0) m(V0)))."""
    return params.p * np.sum(X0 * X0, axis=-1) + params.q * np.sum(V0 * V0, axis=-1)


def weighted_abs(values, log_inv_w) -> np.ndarray:
    """|values| / (h m) given the log inverse weight, without 0*inf or overflow surprises."""
    values = np.abs(np.asarray(values, dtype=float))
    log_inv_w = np.broadcast_to(log_inv_w, values.shape)
    out = values * np.exp(np.minimum(log_inv_w, EXP_SAFE))
    big = log_inv_w > EXP_SAFE
    if np.any(big):
        nz = big & (values > 0)
        with np.errstate(over="ignore", divide="ignore"):
            out[nz] = np.exp(np.log(values[nz]) + log_inv_w[nz])
        out[big & (values == 0)] = 0.0
    return out


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: time knots x position cube x velocity cube."""

    t_knots: tuple
    x_max: float
    n_x: int
    v_max: float
    n_v: int

    def __post_init__(self):
        knots = tuple(float(t) for t in self.t_knots)
        object.__setattr__(self, "t_knots", knots)
        if len(knots) < 1 or any(b <= a for a, b in zip(knots, knots[1:])):
            raise DomainError("time knots must be strictly increasing")
        if self.n_x < 2 or self.n_v < 2:
            raise DomainError("need at least two nodes per axis")
        if not (self.x_max > 0 and self.v_max > 0):
            raise DomainError("box half-widths must be positive")

    @classmethod
    def desk(cls, params: WeightParams = WeightParams(), T: float = 1.0, K: int = 8,
             n_x: int = 9, n_v: int = 9) -> "GridSpec":
        """Default desk-scale grid: weights below 1e-7 outside the box."""
        v_max = 4.0 / np.sqrt(params.q)
        x_max = 4.0 / np.sqrt(params.p) + T * v_max
        return cls(tuple(np.linspace(0.0, T, K)), x_max, n_x, v_max, n_v)

    @property
    def shape(self) -> tuple:
        return (len(self.t_knots),) + (self.n_x,) * 3 + (self.n_v,) * 3

    @property
    def x_axis(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_x)

    @property
    def v_axis(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.n_v)

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_x - 1)

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / (self.n_v - 1)

    def x_nodes(self) -> np.ndarray:
        a = self.x_axis
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1).reshape(-1, 3)

    def v_nodes(self) -> np.ndarray:
        a = self.v_axis
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1).reshape(-1, 3)

    def phase_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """All (x, v) node pairs of one time slice, each of shape (n_x^3 * n_v^3, 3)."""
        xn, vn = self.x_nodes(), self.v_nodes()
        return (np.repeat(xn, vn.shape[0], axis=0), np.tile(vn, (xn.shape[0], 1)))

    def velocity_weights(self) -> np.ndarray:
        """Trapezoid weights on the velocity nodes; exact for the multilinear interpolant."""
        w = np.full(self.n_v, self.dv)
        w[0] = w[-1] = 0.5 * self.dv
        return (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()

    def time_coordinate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        knots = np.asarray(self.t_knots)
        if np.any(t < knots[0] - 1e-12) or np.any(t > knots[-1] + 1e-12):
            raise DomainError("time outside the knot range")
        if knots.size == 1:
            return np.zeros_like(t)
        return np.interp(t, knots, np.arange(knots.size, dtype=float))

    def x_coordinate(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) + self.x_max) / self.dx

    def v_coordinate(self, v) -> np.ndarray:
        return (np.asarray(v, dtype=float) + self.v_max) / self.dv

    def to_dict(self) -> dict:
        return {"t_knots": list(self.t_knots), "x_max": self.x_max, "n_x": self.n_x,
                "v_max": self.v_max, "n_v": self.n_v}


def multilinear_stencil(shape: tuple, coords: list, exact_tol: float = 1e-12):
    """Corner flat indices and weights for multilinear interpolation.

    ``coords`` holds one fractional index array per axis (broadcastable).
    Returns ``(corners, inside)`` where ``corners`` is a list of
    ``(flat_index, weight)`` pairs and ``inside`` masks points within the
    grid.  Axes whose coordinates all sit on nodes are gathered directly, so
    there are ``2**(number of genuinely fractional axes)`` corners.
    """
    coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
    out_shape = coords[0].shape
    strides = np.cumprod((1,) + tuple(shape[:0:-1]))[::-1]
    base = np.zeros(out_shape, dtype=np.int64)
    inside = np.ones(out_shape, dtype=bool)
    frac_axes = []
    for ax, (c, n) in enumerate(zip(coords, shape)):
        inside &= (c >= -exact_tol) & (c <= n - 1 + exact_tol)
        cc = np.clip(c, 0.0, n - 1)
        r = np.rint(cc)
        if n == 1 or np.all(np.abs(cc - r) <= exact_tol):
            base += r.astype(np.int64) * strides[ax]
            continue
        i0 = np.minimum(np.floor(cc).astype(np.int64), n - 2)
        base += i0 * strides[ax]
        frac_axes.append((strides[ax], cc - i0))
    corners = []
    for corner in range(1 << len(frac_axes)):
        idx = base.copy()
        wt = np.ones(out_shape)
        for bit, (stride, lam) in enumerate(frac_axes):
            if corner >> bit & 1:
                idx += stride
                wt *= lam
            else:
                wt *= 1.0 - lam
        corners.append((idx, wt))
    return corners, inside


def multilinear(values: np.ndarray, coords: list, exact_tol: float = 1e-12) -> np.ndarray:
    """Multilinear interpolation of ``values`` at fractional index coordinates.

    Points outside ``[0, n-1]`` on any axis evaluate to 0.
    """
    corners, inside = multilinear_stencil(values.shape, coords, exact_tol)
    flat_vals = values.reshape(-1)
    out = np.zeros(inside.shape)
    for idx, wt in corners:
        out += wt * flat_vals[idx]
    out[~inside] = 0.0
    return out


def shift_positions(arr: np.ndarray, offset, axes=(1, 2, 3)) -> np.ndarray:
    """Evaluate a gridded array at node + ``offset`` (index units) along ``axes``.

    Linear interpolation per axis with zeros outside the grid.
    """
    out = arr
    for ax, d in zip(axes, offset):
        if d == 0.0:
            continue
        k = int(np.floor(d))
        lam = d - k
        out = (1.0 - lam) * _slide(out, k, ax) + (lam * _slide(out, k + 1, ax) if lam else 0.0)
    return out


def shift_positions_geometric(arr: np.ndarray, offset, axes=(1, 2, 3)) -> np.ndarray:
    """Like :func:`shift_positions` but interpolating log(arr) quadratically.

    Three-point interpolation in the log domain is exact for Gaussian
    profiles, which linear rules badly distort when the shift is much
    smaller than the spacing.  Where a neighbour is zero or off the grid, or
    the quadratic correction exceeds one e-fold (data not locally Gaussian),
    the rule falls back to log-linear.  Meant for nonnegative arrays; zeros stay 0.
    """
    with np.errstate(divide="ignore"):
        out = np.log(np.maximum(arr, 0.0))
    for ax, d in zip(axes, offset):
        if d == 0.0:
            continue
        k = int(np.floor(d))
        lam = d - k
        lo = _slide(out, k, ax, fill=-np.inf)
        if not lam:
            out = lo
            continue
        hi = _slide(out, k + 1, ax, fill=-np.inf)
        c = int(np.rint(d))
        r = d - c
        third = _slide(out, c + 1 if c == k + 1 else c - 1, ax, fill=-np.inf)
        mid, far = (hi, lo) if c == k + 1 else (lo, hi)
        # Lagrange weights on the nodes c-1, c, c+1 at offset r from c
        wm, w0, wp = 0.5 * r * (r - 1.0), 1.0 - r * r, 0.5 * r * (r + 1.0)
        below, above = (far, third) if c == k + 1 else (third, far)
        with np.errstate(invalid="ignore"):
            quad = wm * below + w0 * mid + wp * above
            lin = (1.0 - lam) * lo + lam * hi
            ok = np.isfinite(below) & np.isfinite(mid) & np.isfinite(above) & (np.abs(quad - lin) <= 1.0)
        out = np.where(ok, quad, lin)
    return np.exp(out, out=out)


def _slide(arr, k, ax, fill=0.0):
    """result[i] = arr[i + k] along ``ax``, ``fill`` where out of range."""
    n = arr.shape[ax]
    res = np.full_like(arr, fill)
    if abs(k) >= n:
        return res
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if k >= 0:
        src[ax], dst[ax] = slice(k, n), slice(0, n - k)
    else:
        src[ax], dst[ax] = slice(0, n + k), slice(-k, n)
    res[tuple(dst)] = arr[tuple(src)]
    return res


@dataclass(eq=False)
class DistributionField:
    """Gridded f(t, x, v): linear in t, multilinear in x and v, zero outside the box."""

    grid: GridSpec
    values: np.ndarray
    _density: np.ndarray | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise DomainError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("distribution values must be finite")
        vals.setflags(write=False)
        self.values = vals

    @classmethod
    def zeros(cls, grid: GridSpec) -> "DistributionField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, f: Callable) -> "DistributionField":
        """Sample an evaluable ``f(t, x, v)`` at every node."""
        xs, vs = grid.phase_nodes()
        vals = np.empty(grid.shape)
        for k, t in enumerate(grid.t_knots):
            vals[k] = np.asarray(f(t, xs, vs), dtype=float).reshape(grid.shape[1:])
        return cls(grid, vals)

    def __call__(self, t, x, v) -> np.ndarray:
        g = self.grid
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        tc = np.broadcast_to(g.time_coordinate(t), x.shape[:-1])
        xc = g.x_coordinate(x)
        vc = g.v_coordinate(v)
        coords = [tc] + [xc[..., i] for i in range(3)] + [vc[..., i] for i in range(3)]
        return multilinear(self.values, coords)

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(np.abs(x) <= self.grid.x_max + 1e-12, axis=-1)

    def density_grid(self) -> np.ndarray:
        """rho at every (knot, x-node); memoised, exact for the interpolant."""
        if self._density is None:
            K = len(self.grid.t_knots)
            nx3 = self.grid.n_x**3
            flat = self.values.reshape(K, nx3, -1)
            self._density = (flat @ self.grid.velocity_weights()).reshape((K,) + (self.grid.n_x,) * 3)
        return self._density

    def density(self, t, x) -> np.ndarray:
        g = self.grid
        x = np.asarray(x, dtype=float)
        tc = np.broadcast_to(g.time_coordinate(t), x.shape[:-1])
        xc = g.x_coordinate(x)
        return multilinear(self.density_grid(), [tc] + [xc[..., i] for i in range(3)])

    def with_values(self, values) -> "DistributionField":
        return DistributionField(self.grid, values)


# ---------------------------------------------------------------------------
# norms

@dataclass(frozen=True)
class NormSampling:
    """Grid nodes (optionally) plus ``n_random`` uniform refinement points."""

    grid: GridSpec | None = None
    n_random: int = 0
    seed: int = 0


@dataclass(frozen=True)
class NormEstimate:
    value: float
    argmax: dict
    sample_count: int

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("norm estimate must be nonnegative")


def node_log_weights(grid: GridSpec, field: ForceField, params: WeightParams) -> np.ndarray:
    """log(1/(h(X0) m(V0))) at every grid node, shape ``grid.shape``."""
    xs, vs = grid.phase_nodes()
    out = np.empty(grid.shape)
    for k, t in enumerate(grid.t_knots):
        back = field.flow(0.0, PhaseState(t, xs, vs))
        out[k] = log_inverse_weight(back.x, back.v, params).reshape(grid.shape[1:])
    return out


def _sample_points(grid: GridSpec, sampling: NormSampling):
    xs, vs = grid.phase_nodes()
    for t in grid.t_knots:
        yield t, xs, vs
    if sampling.n_random:
        rng = np.random.default_rng(sampling.seed)
        n = sampling.n_random
        t = rng.uniform(grid.t_knots[0], grid.t_knots[-1], n)
        x = rng.uniform(-grid.x_max, grid.x_max, (n, 3))
        v = rng.uniform(-grid.v_max, grid.v_max, (n, 3))
        yield t, x, v


def weighted_norm(f, field: ForceField, params: WeightParams,
                  sampling: NormSampling = NormSampling()) -> NormEstimate:
    """Grid-plus-sample maximum of |f| / (h(X(0)) m(V(0))).

    A lower estimate of the true supremum; refining the sample set can only
    raise it.
    """
    grid = sampling.grid or getattr(f, "grid", None)
    if grid is None:
        raise DomainError("weighted_norm needs a grid for evaluable f")
    best, arg, count = 0.0, None, 0
    for t, x, v in _sample_points(grid, sampling):
        vals = np.asarray(f(t, x, v), dtype=float).reshape(-1)
        back = field.flow(0.0, PhaseState(t, x, v))
        r = weighted_abs(vals, log_inverse_weight(back.x, back.v, params))
        count += r.size
        i = int(np.argmax(r))
        if r[i] > best or arg is None:
            best = float(r[i])
            ti = float(np.broadcast_to(t, r.shape)[i])
            arg = {"t": ti, "x": [float(c) for c in x[i]], "v": [float(c) for c in v[i]]}
    return NormEstimate(best, arg, count)


def comparison_initial_norm(f0: Callable, params: WeightParams, grid: GridSpec | None = None) -> float:
    """Sampled sup over the (x, v) nodes of |f0| / (h m)."""
    grid = grid or GridSpec.desk(params)
    xs, vs = grid.phase_nodes()
    vals = np.asarray(f0(xs, vs), dtype=float)
    return float(np.max(weighted_abs(vals, log_inverse_weight(xs, vs, params))))


def in_MR(f, R: float, field: ForceField, params: WeightParams,
          sampling: NormSampling = NormSampling(), rtol: float = 1e-12) -> bool:
    """Membership of the sampled norm in the closed ball of radius R (relative slack ``rtol``)."""
    if not R > 0:
        raise DomainError("R must be positive")
    return weighted_norm(f, field, params, sampling).value <= R * (1.0 + rtol)


# ---------------------------------------------------------------------------
# serialisation

def write_field(path, f: DistributionField, weights: WeightParams | None = None) -> None:
    """Binary layout: magic, endianness tag, header length, JSON header, float64 values."""
    order = "<" if sys.byteorder == "little" else ">"
    header = {
        "grid": f.grid.to_dict(),
        "weights": None if weights is None else {"p": weights.p, "q": weights.q},
        "dtype": "float64",
        "order": "C",
        "shape": list(f.grid.shape),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    pad = (-(len(MAGIC) + 1 + 4 + len(blob))) % 8
    blob += b" " * pad
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(order.encode("ascii"))
        fh.write(struct.pack(order + "I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(f.values, dtype=order + "f8").tobytes())


def read_field(path) -> tuple[DistributionField, WeightParams | None]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise DomainError("not a distribution field file")
    order = raw[len(MAGIC):len(MAGIC) + 1].decode("ascii")
    if order not in "<>":
        raise DomainError("bad endianness tag")
    pos = len(MAGIC) + 1
    (hlen,) = struct.unpack(order + "I", raw[pos:pos + 4])
    pos += 4
    header = json.loads(raw[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    g = header["grid"]
    grid = GridSpec(tuple(g["t_knots"]), g["x_max"], g["n_x"], g["v_max"], g["n_v"])
    vals = np.frombuffer(raw[pos:], dtype=order + "f8").reshape(header["shape"]).astype(float)
    w = header["weights"]
    return DistributionField(grid, vals), (None if w is None else WeightParams(w["p"], w["q"]))


def export_csv_slice(path, f: DistributionField, knot: int = -1, x_axis: int = 0, v_axis: int = 0) -> None:
    """Write f(t_knot, x, v) along one position and one velocity axis, others at the centre node."""
    g = f.grid
    cx, cv = g.n_x // 2, g.n_v // 2
    idx = [knot, cx, cx, cx, cv, cv, cv]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "v", "f"])
        for i, xv in enumerate(g.x_axis):
            for j, vv in enumerate(g.v_axis):
                idx[1 + x_axis] = i
                idx[4 + v_axis] = j
                w.writerow([repr(g.t_knots[knot]), repr(float(xv)), repr(float(vv)),
                            repr(float(f.values[tuple(idx)]))])
