"""Latent / smoothing kernels.

The same density plays two roles: it is the law of the latent variable Z
pushed through the flow, and it is the kernel of the resulting density
estimator.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError

KINDS = ("gaussian", "uniform_product")

_LOG_2PI = np.log(2.0 * np.pi)


def as_points(x, dim):
    """Return ``x`` as a float array of shape (m, dim) plus a flag telling
    whether the caller passed a single vector."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def make_rng(seed):
    """Accept an int seed, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}; choose from {KINDS}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"kernel dimension must be a positive integer, got {self.dim}")

    @property
    def compact(self):
        return self.kind == "uniform_product"

    def log_density(self, x):
        pts, single = as_points(x, self.dim)
        if self.kind == "gaussian":
            out = -0.5 * self.dim * _LOG_2PI - 0.5 * np.einsum("ij,ij->i", pts, pts)
        else:
            inside = np.all(np.abs(pts) <= 1.0, axis=1)
            out = np.where(inside, -self.dim * np.log(2.0), -np.inf)
        return out[0] if single else out

    def density(self, x, log_scale=False):
        """K(x) for a vector or each row of an (m, d) array."""
        logk = self.log_density(x)
        return logk if log_scale else np.exp(logk)

    def sample(self, count, seed=None):
        """``count`` i.i.d. draws, shape (count, dim)."""
        if int(count) != count or count < 1:
            raise InputError(f"count must be a positive integer, got {count}")
        rng = make_rng(seed)
        if self.kind == "gaussian":
            return rng.standard_normal((int(count), self.dim))
        return rng.uniform(-1.0, 1.0, size=(int(count), self.dim))

    def from_uniform(self, u):
        """Map points of (0,1)^d coordinatewise through the kernel's
        quantile function; used to build stratified latent draws."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            from scipy.special import ndtri

            return ndtri(u)
        return 2.0 * u - 1.0


def kernel_density(k, x, log_scale=False):
    return k.density(x, log_scale=log_scale)


def kernel_sample(k, count, seed=None):
    return k.sample(count, seed)
