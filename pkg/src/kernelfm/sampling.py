"""Stratified uniform designs used to lower the Monte Carlo floor of
sample-based Wasserstein estimates.

Every point of a stratified design is still marginally uniform on the unit
cube; the points are merely negatively correlated so that the empirical
measure sits closer to the population measure.
"""

import numpy as np
from scipy.stats import qmc

from .kernel import make_rng


def stratified_uniform(count, dim, seed=None):
    """Jittered grid when ``count`` is a perfect ``dim``-th power, Latin
    hypercube otherwise.  Rows come back in random order."""
    rng = make_rng(seed)
    side = int(round(count ** (1.0 / dim)))
    if side**dim == count:
        axes = np.meshgrid(*[np.arange(side)] * dim, indexing="ij")
        cells = np.stack([a.reshape(-1) for a in axes], axis=1)
        u = (cells + rng.random((count, dim))) / side
    else:
        u = qmc.LatinHypercube(d=dim, seed=rng).random(count)
    return u[rng.permutation(count)]


def systematic_indices(count, n, seed=None):
    """``count`` indices into range(n) by systematic sampling with a random
    offset: index k is floor((k + U) n / count).  Every index is selected
    with probability count/n (or exactly count/n times when n | count)."""
    rng = make_rng(seed)
    offset = rng.random()
    return np.floor((np.arange(count) + offset) * n / count).astype(int) % n


def hilbert_order(points, order=16):
    """Permutation sorting 2-d points along a Hilbert curve over their
    bounding box, so that consecutive indices are spatially close."""
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0)
    span = np.maximum(pts.max(axis=0) - lo, 1e-300)
    side = 1 << order
    q = np.minimum(((pts - lo) / span * side).astype(np.int64), side - 1)
    x, y = q[:, 0].copy(), q[:, 1].copy()
    key = np.zeros(len(pts), dtype=np.int64)
    s = side // 2
    while s > 0:
        rx = ((x & s) > 0).astype(np.int64)
        ry = ((y & s) > 0).astype(np.int64)
        key += s * s * ((3 * rx) ^ ry)
        swap = ry == 0
        flip = swap & (rx == 1)
        x[flip] = side - 1 - x[flip]
        y[flip] = side - 1 - y[flip]
        x[swap], y[swap] = y[swap].copy(), x[swap].copy()
        s //= 2
    return np.argsort(key, kind="stable")


def spatial_order(points):
    """Locality-preserving ordering in any dimension: sort in 1-d, Hilbert
    curve in 2-d, Hilbert curve on the first two coordinates otherwise."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        return np.argsort(pts[:, 0], kind="stable")
    return hilbert_order(pts[:, :2])
