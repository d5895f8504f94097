"""Kernel density estimator viewed as a generative model.

Sampling draws a data point uniformly at random and adds sigma_min * Z with
Z from the kernel; the density is the usual mixture
(1 / (n sigma_min^d)) sum_i K((x - X_i) / sigma_min).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .empirical import Dataset
from .errors import InputError
from .kernel import KernelSpec, as_points, make_rng
from .sampling import spatial_order, stratified_uniform, systematic_indices


@dataclass(frozen=True)
class KdeModel:
    data: Dataset
    bandwidth: float
    kernel: KernelSpec = None

    def __post_init__(self):
        if not isinstance(self.data, Dataset):
            object.__setattr__(self, "data", Dataset(self.data))
        if not (0.0 < self.bandwidth <= 1.0):
            raise InputError(f"bandwidth must lie in (0, 1], got {self.bandwidth}")
        if self.kernel is None:
            object.__setattr__(self, "kernel", KernelSpec("gaussian", self.data.dim))
        if self.kernel.dim != self.data.dim:
            raise InputError("kernel dimension must equal data dimension")

    @property
    def dim(self):
        return self.data.dim

    def sample(self, count, seed=None):
        if int(count) != count or count < 1:
            raise InputError(f"count must be a positive integer, got {count}")
        rng = make_rng(seed)
        idx = rng.integers(0, self.data.n, size=int(count))
        z = self.kernel.sample(count, rng)
        return self.data.points[idx] + self.bandwidth * z

    def sample_stratified(self, count, seed=None):
        """Draws with the KDE as marginal law but balanced across the data
        (systematic sampling along a space-filling order) and across the
        kernel (stratified latent design).  Used for low-floor W1 estimates."""
        if int(count) != count or count < 1:
            raise InputError(f"count must be a positive integer, got {count}")
        rng = make_rng(seed)
        order = spatial_order(self.data.points)
        idx = order[systematic_indices(int(count), self.data.n, rng)]
        z = self.kernel.from_uniform(stratified_uniform(int(count), self.dim, rng))
        return self.data.points[idx] + self.bandwidth * z

    def density(self, x, log_scale=False):
        pts, single = as_points(x, self.dim)
        u = (pts[:, None, :] - self.data.points[None, :, :]) / self.bandwidth
        m, n, d = u.shape
        logk = self.kernel.log_density(u.reshape(m * n, d)).reshape(m, n)
        out = logsumexp(logk, axis=1) - np.log(n) - d * np.log(self.bandwidth)
        if single:
            out = out[0]
        return out if log_scale else np.exp(out)


def kde_sample(m, count, seed=None):
    return m.sample(count, seed)


def kde_density(m, x, log_scale=False):
    return m.density(x, log_scale=log_scale)


def bandwidth_rule(n, alpha=1.0, d_eff=1, log_correction=False):
    """Rate-optimal bandwidth n^{-1/(2 alpha + d_eff)}.

    With ``log_correction`` the sample size is replaced by n / log(n)^2
    (needs n >= 3; the result is capped at 1).
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    if not (0.0 < alpha <= 1.0):
        raise InputError(f"alpha must lie in (0, 1], got {alpha}")
    if d_eff < 1:
        raise InputError(f"effective dimension must be positive, got {d_eff}")
    expo = -1.0 / (2.0 * alpha + d_eff)
    if not log_correction:
        return float(n) ** expo
    if n < 3:
        raise InputError("log-corrected bandwidth needs n >= 3")
    return min(1.0, (n / np.log(n) ** 2) ** expo)
