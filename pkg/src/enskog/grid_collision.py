"""Collision operator on every node of a gridded distribution at once.

Swapping the order of integration over u and omega turns both collision
integrals into sums over the full sphere of products of velocity-space
linear maps applied to f::

    Q+(x, v) = sum_k w_k F+ A_k(x, v) B_k(x - a omega_k, v)
    A_k(x, v) = int_0^inf r f(x, v - r omega_k) dr          (line integral)
    B_k(x, v) = int_{omega_k-perp} f(x, v - y) d^2y        (plane integral)

    Q-(x, v) = F- f(x, v) sum_k w_k C_k(x + a omega_k, v)
    C_k(x, v) = int f(x, w) ((v - w).omega_k)_+ dw

Each velocity map is a dense ``n_v^3 x n_v^3`` matrix acting on the
multilinear interpolant; it is built once per direction and applied to all
positions and time knots with one matrix product.  Position shifts by
``+-a omega`` interpolate log-linearly, with zeros outside the box, since the
shifted quantities are positive and roughly Gaussian in x.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .collision import CollisionParams, FactorModel
from .errors import DomainError, OutOfDomain
from .quadrature import composite_gauss, gauss_legendre, sphere_rule
from .weighted import DistributionField, GridSpec, shift_positions, shift_positions_geometric

STRICT_RTOL = 1e-12


@dataclass(frozen=True)
class GridRule:
    """Discretisation of the gridded collision operator and the time integral."""

    sphere_polar: int = 4
    sphere_azimuth: int = 8
    line_spacing: float = 0.5
    line_order: int = 2
    plane_spacing: float = 0.5
    plane_order: int = 1
    loss_order: int = 2
    time_nodes: int = 2

    def __post_init__(self):
        if min(self.sphere_polar, self.sphere_azimuth, self.line_order,
               self.plane_order, self.loss_order, self.time_nodes) < 1:
            raise DomainError("grid rule counts must be >= 1")
        if not (self.line_spacing > 0 and self.plane_spacing > 0):
            raise DomainError("grid rule spacings must be positive")


def _stencil(grid: GridSpec, pts: np.ndarray):
    """Multilinear corner indices and weights of velocity points (P, 3) -> (P, 8) each."""
    n = grid.n_v
    c = (pts + grid.v_max) / grid.dv
    inside = np.all((c >= -1e-12) & (c <= n - 1 + 1e-12), axis=1)
    c = np.clip(c, 0.0, n - 1)
    i0 = np.minimum(np.floor(c).astype(np.int64), n - 2)
    lam = c - i0
    cols, wts = [], []
    for corner in range(8):
        bits = [(corner >> k) & 1 for k in range(3)]
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        w = np.where(inside, 1.0, 0.0)
        for k, b in enumerate(bits):
            idx = idx * n + i0[:, k] + b
            w = w * (lam[:, k] if b else 1.0 - lam[:, k])
        cols.append(idx)
        wts.append(w)
    return np.stack(cols, axis=1), np.stack(wts, axis=1)


def _dense(grid: GridSpec, rows: np.ndarray, pts: np.ndarray, qw: np.ndarray) -> np.ndarray:
    """Matrix M with (M f)[row] = sum over points of qw * f_interp(point)."""
    nv3 = grid.n_v**3
    cols, wts = _stencil(grid, pts)
    flat = rows[:, None] * nv3 + cols
    vals = wts * qw[:, None]
    return np.bincount(flat.ravel(), weights=vals.ravel(), minlength=nv3 * nv3).reshape(nv3, nv3)


def _cell_points(grid: GridSpec, order: int):
    """Gauss points of every velocity cell and the interpolation matrix onto them."""
    edges = grid.v_axis
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        y, w = gauss_legendre(order, lo, hi)
        nodes.append(y)
        weights.append(w)
    y, w = np.concatenate(nodes), np.concatenate(weights)
    P = np.stack(np.meshgrid(y, y, y, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    S = _dense_rows(grid, P)
    return P, W, S


def _dense_rows(grid: GridSpec, pts: np.ndarray) -> np.ndarray:
    """Interpolation matrix (P, n_v^3): row p evaluates the interpolant at pts[p]."""
    nv3 = grid.n_v**3
    cols, wts = _stencil(grid, pts)
    flat = np.arange(pts.shape[0])[:, None] * nv3 + cols
    return np.bincount(flat.ravel(), weights=wts.ravel(),
                       minlength=pts.shape[0] * nv3).reshape(pts.shape[0], nv3)


def _antipodes(omega: np.ndarray) -> list:
    """Pairs (k, k') with omega[k'] = -omega[k]; unmatched directions pair with None."""
    used, pairs = set(), []
    for k, om in enumerate(omega):
        if k in used:
            continue
        d = np.linalg.norm(omega + om, axis=1)
        j = int(np.argmin(d))
        if d[j] < 1e-12 and j != k and j not in used:
            pairs.append((k, j))
            used.update((k, j))
        else:
            pairs.append((k, None))
            used.add(k)
    return pairs


@lru_cache(maxsize=2)
def velocity_matrices(grid: GridSpec, rule: "GridRule", tilt: float = 0.0):
    """Transposed line, plane and loss matrices for every sphere direction.

    With ``tilt = q > 0`` the matrices act on f / m(v) at the nodes and
    restore the exact factor m at every quadrature point, so data that is
    Maxwellian in v is integrated without interpolation error.  Independent
    of the diameter and the factors, so one build serves every operator on
    the same grid, rule and tilt.
    """
    gauss = (lambda pts: np.exp(-tilt * np.sum(pts * pts, axis=-1))) if tilt else (lambda pts: 1.0)
    vn = grid.v_nodes()
    nv3 = vn.shape[0]
    omega, _ = sphere_rule(rule.sphere_polar, rule.sphere_azimuth)
    reach = 2.0 * np.sqrt(3.0) * grid.v_max
    r, wr = composite_gauss(0.0, reach, int(np.ceil(reach / rule.line_spacing)), rule.line_order)
    half = np.sqrt(3.0) * grid.v_max
    y, wy = composite_gauss(-half, half, int(np.ceil(2 * half / rule.plane_spacing)), rule.plane_order)
    ya, yb = (c.ravel() for c in np.meshgrid(y, y, indexing="ij"))
    wab = np.outer(wy, wy).ravel()
    rows_line = np.repeat(np.arange(nv3), r.size)
    rows_plane = np.repeat(np.arange(nv3), ya.size)
    cell_pts, cell_w, cell_interp = _cell_points(grid, rule.loss_order)
    line, plane, loss = [], [], []
    for om in omega:
        line_pts = (vn[:, None, :] - r[None, :, None] * om).reshape(-1, 3)
        line.append(_dense(grid, rows_line, line_pts, np.tile(wr * r, nv3) * gauss(line_pts)).T.copy())
        e1 = np.cross(om, [1.0, 0.0, 0.0] if abs(om[0]) < 0.9 else [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(om, e1)
        foot = (vn @ om)[:, None, None] * om
        plane_pts = (foot + ya[None, :, None] * e1 + yb[None, :, None] * e2).reshape(-1, 3)
        plane.append(_dense(grid, rows_plane, plane_pts, np.tile(wab, nv3) * gauss(plane_pts)).T.copy())
        kern = np.maximum(vn @ om - (cell_pts @ om)[:, None], 0.0) * (cell_w * gauss(cell_pts))[:, None]
        loss.append(cell_interp.T @ kern)
    return omega, line, plane, loss


class GridCollisionOperator:
    """Gain and loss of a :class:`DistributionField` at all of its nodes."""

    def __init__(self, grid: GridSpec, params: CollisionParams, plus: FactorModel,
                 minus: FactorModel, rule: GridRule = GridRule(), tilt: float = 0.0):
        self.grid = grid
        self.tilt = float(tilt)
        self.params = params
        self.plus = plus
        self.minus = minus
        self.rule = rule
        self.omega, self.omega_w = sphere_rule(rule.sphere_polar, rule.sphere_azimuth)

    @property
    def matrices(self):
        return velocity_matrices(self.grid, self.rule, self.tilt)

    def _check_strict(self, vals):
        peak = np.max(np.abs(vals))
        if peak == 0.0:
            return
        faces = np.zeros(vals.shape[1:4], dtype=bool)
        faces[0, :, :] = faces[-1, :, :] = True
        faces[:, 0, :] = faces[:, -1, :] = True
        faces[:, :, 0] = faces[:, :, -1] = True
        if np.max(np.abs(vals[:, faces])) > STRICT_RTOL * peak:
            raise OutOfDomain("collision stencil leaves the box where the distribution is non-negligible")

    def gain_loss(self, f: DistributionField) -> tuple[np.ndarray, np.ndarray]:
        """Gain and loss arrays with the grid's shape."""
        g = self.grid
        if f.grid != g:
            raise DomainError("field lives on a different grid")
        vals = f.values
        if self.params.strict_stencil:
            self._check_strict(vals)
        K = len(g.t_knots)
        nv3 = g.n_v**3
        shape = (K,) + (g.n_x,) * 3 + (nv3,)
        F = vals.reshape(-1, nv3)
        if self.tilt:
            F = F * np.exp(self.tilt * np.sum(g.v_nodes() ** 2, axis=1))
        rho = f.density_grid()
        a = self.params.a
        contact = self.params.factor_at_contact
        Fp = None if contact else self.plus(rho)[..., None]
        Fm = None if contact else self.minus(rho)[..., None]
        omega, line, plane, lossm = self.matrices
        gain = np.zeros(shape)
        lossint = np.zeros(shape)
        for k, k2 in _antipodes(omega):
            Bk = (F @ plane[k]).reshape(shape)
            for j in (k, k2):
                if j is None:
                    continue
                d = a * omega[j] / g.dx
                w = self.omega_w[j]
                if contact:
                    Fp = self.plus(shift_positions(rho, -0.5 * d))[..., None]
                    Fm = self.minus(shift_positions(rho, 0.5 * d))[..., None]
                prod = shift_positions_geometric(Bk, -d)
                prod *= (F @ line[j]).reshape(shape)
                prod *= w * Fp
                gain += prod
                C = shift_positions_geometric((F @ lossm[j]).reshape(shape), d)
                C *= w * Fm
                lossint += C
        lossint *= vals.reshape(shape)
        return gain.reshape(g.shape), lossint.reshape(g.shape)

    def __call__(self, f: DistributionField) -> np.ndarray:
        gain, loss = self.gain_loss(f)
        return gain - loss
