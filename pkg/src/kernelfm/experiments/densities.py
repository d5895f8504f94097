"""Target densities with exact samplers and CDFs, plus the quadrature for
the smoothing bias W1(P, K_sigma * P) on the line."""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid
from scipy.special import ndtr

from ..errors import ConfigError, InputError
from ..kernel import make_rng
from ..sampling import stratified_uniform


@dataclass(frozen=True)
class ProductDensity:
    """Independent coordinates, each with the same one-dimensional law."""

    name: str
    marginal: object
    dim: int
    box: tuple = (-1.0, 1.0)

    def sample(self, count, seed=None):
        rng = make_rng(seed)
        return self.marginal.ppf(rng.random((int(count), self.dim)))

    def sample_stratified(self, count, seed=None):
        return self.marginal.ppf(stratified_uniform(int(count), self.dim, seed))

    def pdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.prod(self.marginal.pdf(x), axis=1)

    def cdf(self, x):
        """Marginal CDF, applied coordinatewise."""
        return self.marginal.cdf(x)

    def ppf(self, u):
        return self.marginal.ppf(u)


def trapezoid_marginal(ramp=0.5):
    """Flat top on [-1 + ramp, 1 - ramp] with linear ramps to zero at +-1;
    Lipschitz with constant h / ramp where h = 1 / (2 - ramp)."""
    if not 0 < ramp <= 1:
        raise InputError("ramp width must lie in (0, 1]")
    return stats.trapezoid(c=ramp / 2, d=1 - ramp / 2, loc=-1.0, scale=2.0)


def truncated_gaussian_marginal(scale=0.5):
    return stats.truncnorm(-1.0 / scale, 1.0 / scale, loc=0.0, scale=scale)


def raised_cosine_marginal():
    """(1 + cos(pi x)) / 2 on [-1, 1]."""
    return stats.cosine(loc=0.0, scale=1.0 / np.pi)


def make_density(name, dim):
    if name == "trapezoid":
        return ProductDensity(name, trapezoid_marginal(), dim)
    if name == "truncated_gaussian":
        return ProductDensity(name, truncated_gaussian_marginal(), dim)
    if name == "raised_cosine":
        if dim != 1:
            raise ConfigError("the raised-cosine density is one-dimensional")
        return ProductDensity(name, raised_cosine_marginal(), 1)
    raise ConfigError(f"unknown density {name!r}")


def _kernel_cdf(kind, u):
    if kind == "gaussian":
        return ndtr(u)
    if kind == "uniform_product":
        return np.clip((u + 1.0) / 2.0, 0.0, 1.0)
    raise InputError(f"unknown kernel kind {kind!r}")


def smoothed_cdf(density, sigma, x, kernel="gaussian", panels=256, order=8):
    """F_sigma(x) = int p(y) Phi_K((x - y) / sigma) dy by composite
    Gauss-Legendre over the support of the one-dimensional density."""
    lo, hi = density.box
    nodes, wts = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    w = (half[:, None] * wts[None, :]).reshape(-1) * density.marginal.pdf(y)
    x = np.asarray(x, dtype=float)
    return _kernel_cdf(kernel, (x[..., None] - y) / sigma) @ w


def smoothing_bias(density, sigma, kernel="gaussian", resolution=20_001, reach=10.0):
    """W1(P, K_sigma * P) = int |F - F_sigma| for a one-dimensional P."""
    if density.dim != 1:
        raise InputError("bias quadrature is one-dimensional")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    lo, hi = density.box
    x = np.linspace(lo - reach * sigma, hi + reach * sigma, resolution)
    diff = np.abs(density.marginal.cdf(x) - smoothed_cdf(density, sigma, x, kernel))
    return float(trapezoid(diff, x))
