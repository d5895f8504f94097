"""Distances between distributions and the log-log regression used by the
rate experiments."""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.integrate import trapezoid
from scipy.stats import linregress

from .errors import InputError, SizeError
from .kernel import make_rng

DEFAULT_ASSIGNMENT_CAP = 2048


@dataclass
class TransportResult:
    cost: float
    plan: Optional[np.ndarray]
    method: str

    def __float__(self):
        return float(self.cost)


def _as_sample(a):
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError("samples must be a list of scalars or of vectors")
    return arr


def _check_sizes(a, b):
    if len(a) != len(b):
        raise InputError(f"equal sample sizes required, got {len(a)} and {len(b)}")
    if len(a) < 1:
        raise InputError("samples must be non-empty")


def w1_1d(a, b):
    """Exact W1 between two equal-size samples on the line (sorted coupling)."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    _check_sizes(a, b)
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def w1_assignment(a, b, cap=DEFAULT_ASSIGNMENT_CAP):
    """Exact W1 between two equal-size point clouds.

    Solves the linear assignment problem on the full Euclidean cost matrix;
    for uniform weights and equal sizes an optimal coupling is a permutation.
    """
    a, b = _as_sample(a), _as_sample(b)
    _check_sizes(a, b)
    if a.shape[1] != b.shape[1]:
        raise InputError("samples live in different dimensions")
    if len(a) > cap:
        raise SizeError(
            f"assignment on {len(a)} points exceeds the cap of {cap}; "
            "subsample or use w1_sliced as a diagnostic"
        )
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    return TransportResult(float(cost[rows, cols].mean()), np.stack([rows, cols], axis=1), "assignment")


def w1_sliced(a, b, projections=100, seed=None):
    """Average 1-d W1 over random unit directions.

    A diagnostic only: it never exceeds the true W1 and is not a substitute
    for it.
    """
    if int(projections) != projections or projections < 1:
        raise InputError("projections must be a positive integer")
    a, b = _as_sample(a), _as_sample(b)
    _check_sizes(a, b)
    d = a.shape[1]
    if d == 1:
        return w1_1d(a[:, 0], b[:, 0])
    rng = make_rng(seed)
    dirs = rng.standard_normal((int(projections), d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.mean(np.abs(pa - pb)))


@dataclass(frozen=True)
class Density1D:
    evaluator: Callable
    lo: float
    hi: float
    resolution: int = 10_001

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InputError("integration domain must have hi > lo")
        if self.resolution < 2:
            raise InputError("grid needs at least two points")

    @property
    def grid(self):
        return np.linspace(self.lo, self.hi, int(self.resolution))

    def values(self):
        v = np.asarray(self.evaluator(self.grid), dtype=float)
        if np.any(v < -1e-12) or not np.all(np.isfinite(v)):
            raise InputError("density must be finite and nonnegative on its grid")
        return np.maximum(v, 0.0)

    def mass(self):
        return float(trapezoid(self.values(), self.grid))


def tv_1d(p, q):
    """Total variation as half the trapezoid integral of |p - q|."""
    if (p.lo, p.hi, p.resolution) != (q.lo, q.hi, q.resolution):
        raise InputError("densities must share the same domain and grid")
    val = 0.5 * trapezoid(np.abs(p.values() - q.values()), p.grid)
    return float(min(1.0, max(0.0, val)))


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def slope_fit(xs, ys):
    """Ordinary least squares line through (xs, ys)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InputError("xs and ys must be 1-d and of equal length")
    if len(xs) < 3:
        raise InputError("a slope fit needs at least three points")
    if np.ptp(xs) == 0:
        raise InputError("xs are all equal; slope undefined")
    res = linregress(xs, ys)
    r2 = 1.0 if np.ptp(ys) == 0 else float(res.rvalue**2)
    return SlopeFit(float(res.slope), float(res.intercept), r2)
