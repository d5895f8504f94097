"""The sine curve {(y, sin y) : y in [-3, 3]} as a one-dimensional manifold in
the plane: uniform sampling, nearest-point projection, tube membership and
the distance/gap/transport statistics computed on projected samples."""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial import cKDTree

from .errors import InputError
from .kernel import make_rng
from .metrics import w1_1d

_ARC_TABLE_SIZE = 60_001
_NEWTON_ITERS = 30
_GRAD_TOL = 1e-10


def _speed(y):
    return np.sqrt(1.0 + np.cos(y) ** 2)


def _curvature(y):
    return np.abs(np.sin(y)) / (1.0 + np.cos(y) ** 2) ** 1.5


class Projection(NamedTuple):
    foot: np.ndarray
    param: np.ndarray
    dist: np.ndarray
    in_tube: np.ndarray


class ArcW1(NamedTuple):
    value: float
    outside_a: int
    outside_b: int


@dataclass(frozen=True)
class SineChart:
    domain: tuple = (-3.0, 3.0)
    tube_radius: float = 0.25
    grid_step: float = 1e-3
    _params: np.ndarray = field(init=False, repr=False, compare=False)
    _arcs: np.ndarray = field(init=False, repr=False, compare=False)
    _grid: np.ndarray = field(init=False, repr=False, compare=False)
    _tree: cKDTree = field(init=False, repr=False, compare=False)
    reach: float = field(init=False, compare=False)

    def __post_init__(self):
        lo, hi = map(float, self.domain)
        if not hi > lo:
            raise InputError("domain must satisfy lo < hi")
        if not self.tube_radius > 0:
            raise InputError("tube radius must be positive")
        params = np.linspace(lo, hi, _ARC_TABLE_SIZE)
        arcs = cumulative_trapezoid(_speed(params), params, initial=0.0)
        assert np.all(np.diff(arcs) > 0), "arc-length table must be strictly increasing"
        count = int(round((hi - lo) / self.grid_step)) + 1
        grid = np.linspace(lo, hi, count)
        set_ = object.__setattr__
        set_(self, "domain", (lo, hi))
        set_(self, "_params", params)
        set_(self, "_arcs", arcs)
        set_(self, "_grid", grid)
        set_(self, "_tree", cKDTree(np.column_stack([grid, np.sin(grid)])))
        set_(self, "reach", estimate_reach(lo, hi))
        assert self.tube_radius < self.reach, (
            f"tube radius {self.tube_radius} is not below the estimated reach {self.reach:.4f}"
        )

    @property
    def length(self):
        return float(self._arcs[-1])

    def g(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([y, np.sin(y)], axis=-1)

    def arc_of_param(self, y):
        return np.interp(y, self._params, self._arcs)

    def param_of_arc(self, s):
        return np.interp(s, self._arcs, self._params)

    def sample(self, count, seed=None, mode="arc_uniform", stratified=False):
        if int(count) != count or count < 1:
            raise InputError(f"count must be a positive integer, got {count}")
        count = int(count)
        rng = make_rng(seed)
        lo, hi = self.domain
        if stratified:
            u = ((np.arange(count) + rng.random(count)) / count)[rng.permutation(count)]
        else:
            u = rng.random(count)
        if mode == "arc_uniform":
            y = self.param_of_arc(u * self.length)
        elif mode == "x_uniform":
            y = lo + (hi - lo) * u
        else:
            raise InputError(f"unknown sampling mode {mode!r}")
        return self.g(y)

    def project(self, p):
        """Nearest point of the curve: dense-grid search, then safeguarded
        Newton on the stationarity condition, keeping whichever is closer."""
        pts = np.asarray(p, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != 2:
            raise InputError("points must be in the plane")
        if not np.all(np.isfinite(pts)):
            raise InputError("points must be finite")
        lo, hi = self.domain
        _, idx = self._tree.query(pts)
        y_grid = self._grid[idx]
        px, py = pts[:, 0], pts[:, 1]
        y = y_grid.copy()
        for _ in range(_NEWTON_ITERS):
            s, c = np.sin(y), np.cos(y)
            grad = (y - px) + (s - py) * c
            if np.all(np.abs(grad) <= _GRAD_TOL):
                break
            hess = 1.0 + c * c - (s - py) * s
            step = np.where(hess > 0, grad / np.where(hess > 0, hess, 1.0), 0.0)
            y = np.clip(y - step, np.maximum(lo, y_grid - 2 * self.grid_step),
                        np.minimum(hi, y_grid + 2 * self.grid_step))

        def sqdist(v):
            return (v - px) ** 2 + (np.sin(v) - py) ** 2

        y = np.where(np.isfinite(y) & (sqdist(y) <= sqdist(y_grid)), y, y_grid)
        foot = self.g(y)
        dist = np.sqrt(sqdist(y))
        res = Projection(foot, y, dist, dist <= self.tube_radius)
        if single:
            return Projection(foot[0], float(y[0]), float(dist[0]), bool(res.in_tube[0]))
        return res

    def arc_coordinates(self, samples):
        """Arc length of each projection; points outside the tube are sent
        to the arc coordinate of the origin.  Returns (arcs, outside mask)."""
        pr = self.project(np.atleast_2d(samples))
        arcs = self.arc_of_param(pr.param)
        outside = ~pr.in_tube
        arcs = np.where(outside, self.arc_of_param(0.0), arcs)
        return arcs, outside


def estimate_reach(lo=-3.0, hi=3.0, points=1201, tol=1e-3):
    """Reach of the graph of sin on [lo, hi]: the smaller of the inverse
    maximal curvature and half the shortest double-normal chord."""
    fine = np.linspace(lo, hi, 600_001)
    inv_curv = 1.0 / _curvature(fine).max()
    y = np.linspace(lo, hi, points)
    pts = np.column_stack([y, np.sin(y)])
    tang = np.column_stack([np.ones_like(y), np.cos(y)])
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    chord = pts[None, :, :] - pts[:, None, :]
    length = np.linalg.norm(chord, axis=2)
    np.fill_diagonal(length, np.inf)
    unit = chord / length[..., None]
    ci = np.abs(np.einsum("ijk,ik->ij", unit, tang))
    cj = np.abs(np.einsum("ijk,jk->ij", unit, tang))
    double = (ci < tol) & (cj < tol)
    bottleneck = 0.5 * length[double].min() if np.any(double) else np.inf
    return float(min(inv_curv, bottleneck))


def sample_manifold(c, count, seed=None, mode="arc_uniform"):
    return c.sample(count, seed, mode)


def project(c, p):
    return c.project(p)


def mean_distance(c, samples):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) == 0:
        raise InputError("samples must be non-empty")
    return float(np.mean(c.project(samples).dist))


def largest_gap(c, samples, include_boundary=False):
    """Largest spacing between sorted arc coordinates of the projections."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) == 0:
        raise InputError("samples must be non-empty")
    s = np.sort(c.arc_of_param(c.project(samples).param))
    if include_boundary:
        s = np.concatenate([[0.0], s, [c.length]])
    if len(s) < 2:
        return 0.0
    return float(np.max(np.diff(s)))


def arc_w1(c, a, b):
    """Exact 1-d W1 between arc coordinates of two projected samples, with
    the number of out-of-tube points in each sample."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if len(a) != len(b):
        raise InputError(f"equal sample sizes required, got {len(a)} and {len(b)}")
    sa, oa = c.arc_coordinates(a)
    sb, ob = c.arc_coordinates(b)
    return ArcW1(w1_1d(sa, sb), int(oa.sum()), int(ob.sum()))
