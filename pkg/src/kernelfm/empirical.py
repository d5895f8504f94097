"""Empirical marginal path p^n_t and the vector field v^n_t that generates it.

Both are mixtures over the observed points X_1..X_n: the density is the
average of the conditional densities and the field is the posterior-weighted
average of the conditional fields.  Weights are always formed in log space.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import EvaluationError, InputError, UnsupportedError
from .kernel import KernelSpec, as_points
from .paths import PathSchedule, check_time

# upper bound on m * n * d elements materialised per chunk
_CHUNK_ELEMS = 1 << 21


class Dataset:
    """Immutable (n, d) array of observations."""

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InputError("a dataset needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InputError("dataset points must be finite")
        pts.setflags(write=False)
        self.points = pts

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def in_unit_box(self):
        return bool(np.all(np.abs(self.points) <= 1.0))

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, dim={self.dim})"


@dataclass(frozen=True)
class EmpiricalField:
    data: Dataset
    schedule: PathSchedule = field(default_factory=PathSchedule)
    kernel: KernelSpec = None
    truncate: bool = False
    truncation_gap: float = 40.0

    def __post_init__(self):
        if not isinstance(self.data, Dataset):
            object.__setattr__(self, "data", Dataset(self.data))
        if self.kernel is None:
            object.__setattr__(self, "kernel", KernelSpec("gaussian", self.data.dim))
        if self.kernel.dim != self.data.dim:
            raise InputError("kernel dimension must equal data dimension")

    @property
    def dim(self):
        return self.data.dim

    def _prepare(self, t, x):
        t = check_time(t)
        pts, single = as_points(x, self.dim)
        if t.ndim == 0:
            tt = np.full(pts.shape[0], float(t))
        else:
            tt = t.reshape(-1)
            if tt.shape[0] != pts.shape[0]:
                raise InputError("per-point times must match the number of points")
        return tt, pts, single

    def _chunks(self, m):
        step = max(1, _CHUNK_ELEMS // (self.data.n * self.dim))
        for start in range(0, m, step):
            yield slice(start, min(m, start + step))

    def _log_cond(self, t, x):
        """log p_t(x_j | X_i) as an (m, n) array plus the (m, n, d) offsets
        x_j - mu_t(X_i) and the per-row sigma."""
        sig = self.schedule.sigma(t)
        mu = self.schedule.mu(t[:, None], self.data.points[None, :, :])
        diff = x[:, None, :] - mu
        u = diff / sig[:, None, None]
        m, n, d = u.shape
        logk = self.kernel.log_density(u.reshape(m * n, d)).reshape(m, n)
        return logk - d * np.log(sig)[:, None], diff, sig

    def log_conditional(self, t, x):
        tt, pts, single = self._prepare(t, x)
        out = np.concatenate([self._log_cond(tt[s], pts[s])[0] for s in self._chunks(len(pts))])
        return out[0] if single else out

    def density(self, t, x, log_scale=False):
        """p^n_t(x) = mean_i p_t(x | X_i)."""
        tt, pts, single = self._prepare(t, x)
        parts = []
        for s in self._chunks(len(pts)):
            logc = self._log_cond(tt[s], pts[s])[0]
            parts.append(logsumexp(logc, axis=1) - np.log(self.data.n))
        out = np.concatenate(parts)
        if single:
            out = out[0]
        return out if log_scale else np.exp(out)

    def weights(self, t, x):
        """Posterior weights p_t(x|X_i) / sum_j p_t(x|X_j), shape (m, n)."""
        tt, pts, single = self._prepare(t, x)
        out = np.concatenate([self._weights(self._log_cond(tt[s], pts[s])[0]) for s in self._chunks(len(pts))])
        return out[0] if single else out

    def _weights(self, logc):
        top = np.max(logc, axis=1, keepdims=True)
        if not np.all(np.isfinite(top)):
            raise EvaluationError("point lies outside the support of every conditional density")
        shifted = logc - top
        if self.truncate:
            shifted = np.where(shifted < -self.truncation_gap, -np.inf, shifted)
        w = np.exp(shifted)
        return w / w.sum(axis=1, keepdims=True)

    def velocity(self, t, x):
        """v^n_t(x); accepts a scalar t or one time per row of ``x``."""
        tt, pts, single = self._prepare(t, x)
        out = np.empty_like(pts)
        for s in self._chunks(len(pts)):
            t_s = tt[s]
            logc, diff, sig = self._log_cond(t_s, pts[s])
            w = self._weights(logc)
            rate = self.schedule.sigma_dot(t_s) / sig
            mu_dot = self.schedule.mu_dot(t_s[:, None], self.data.points[None, :, :])
            cond = rate[:, None, None] * diff + mu_dot
            out[s] = np.einsum("mn,mnd->md", w, cond)
        return out[0] if single else out

    def conditional_velocities(self, t, x):
        """All n conditional fields at x, shape (m, n, d)."""
        tt, pts, single = self._prepare(t, x)
        sig = self.schedule.sigma(tt)
        diff = pts[:, None, :] - self.schedule.mu(tt[:, None], self.data.points[None])
        cond = (self.schedule.sigma_dot(tt) / sig)[:, None, None] * diff
        cond = cond + self.schedule.mu_dot(tt[:, None], self.data.points[None])
        return cond[0] if single else cond

    def __call__(self, t, x):
        return self.velocity(t, x)

    def field_bounds(self, a, t):
        """Sup-norm bound on (-a, a)^d and global Lipschitz bound of v^n_t.

        Returns ``(sqrt(d) (1 + a) / sigma_t, 1 / sigma_t + 2 d / sigma_t^3)``.
        Valid only for data inside [-1, 1]^d, the linear schedule and the
        Gaussian kernel.
        """
        if not a > 1:
            raise InputError(f"box half-width a must exceed 1, got {a}")
        if not self.schedule.is_default:
            raise UnsupportedError("field bounds are only available for the linear schedule")
        if self.kernel.kind != "gaussian":
            raise UnsupportedError("the Lipschitz bound is only established for the Gaussian kernel")
        if not self.data.in_unit_box:
            raise UnsupportedError("field bounds need every data point inside [-1, 1]^d")
        sig = float(self.schedule.sigma(check_time(t)))
        d = self.dim
        return np.sqrt(d) * (1.0 + a) / sig, 1.0 / sig + 2.0 * d / sig**3


def emp_density(f, t, x, log_scale=False):
    return f.density(t, x, log_scale=log_scale)


def emp_velocity(f, t, x):
    return f.velocity(t, x)


def field_bounds(f, a, t):
    return f.field_bounds(a, t)


def continuity_residual(field, t, x, h=1e-4):
    """Central-difference residual of d/dt p_t + div(p_t v_t) at (t, x).

    ``field`` must expose ``density(t, x)`` and ``velocity(t, x)``.  Returns
    the residual and p_t(x).  ``t +/- h`` must stay inside [0, 1].
    """
    x = np.asarray(x, dtype=float)
    dpdt = (field.density(t + h, x) - field.density(t - h, x)) / (2 * h)
    div = 0.0
    for k in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., k] = h
        fp = field.density(t, x + e) * field.velocity(t, x + e)[..., k]
        fm = field.density(t, x - e) * field.velocity(t, x - e)[..., k]
        div = div + (fp - fm) / (2 * h)
    return dpdt + div, field.density(t, x)
