"""Conditional kernel probability paths.

For an anchor y the conditional flow is psi_t(z|y) = sigma_t z + mu_t(y);
its law has density sigma_t^{-d} K((x - mu_t(y)) / sigma_t) and it is
generated by the affine field

    v_t(x|y) = sigma_dot_t / sigma_t * (x - mu_t(y)) + mu_dot_t(y).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, StateError
from .kernel import KernelSpec, as_points


def check_time(t):
    """Validate t in [0, 1] (scalar or array) without clamping."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InputError(f"time must lie in [0, 1], got {t}")
    return arr


@dataclass(frozen=True)
class PathSchedule:
    """sigma_t and mu_t with their time derivatives.

    ``power=1`` is the linear schedule sigma_t = 1 - (1 - sigma_min) t,
    mu_t(y) = t y.  Other powers give the curved family
    sigma_t = (1 - (1 - sigma_min^{1/k}) t)^k with the same endpoints.
    Subclasses may override the four methods to supply other schedules.
    """

    sigma_min: float = 0.1
    power: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.sigma_min <= 1.0):
            raise InputError(f"sigma_min must lie in (0, 1], got {self.sigma_min}")
        if not self.power > 0:
            raise InputError(f"schedule power must be positive, got {self.power}")

    @property
    def is_default(self):
        return type(self) is PathSchedule and self.power == 1.0

    @property
    def _rate(self):
        return 1.0 - self.sigma_min ** (1.0 / self.power)

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        if self.power == 1.0:
            return 1.0 - (1.0 - self.sigma_min) * t
        return (1.0 - self._rate * t) ** self.power

    def sigma_dot(self, t):
        t = np.asarray(t, dtype=float)
        if self.power == 1.0:
            return np.full_like(t, -(1.0 - self.sigma_min))
        return -self.power * self._rate * (1.0 - self._rate * t) ** (self.power - 1.0)

    def mu(self, t, y):
        return np.asarray(t, dtype=float)[..., None] * np.asarray(y, dtype=float)

    def mu_dot(self, t, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(y, np.broadcast_shapes(np.shape(t) + (1,), y.shape)).copy()


def _checked_sigma(schedule, t):
    s = schedule.sigma(t)
    if np.any(s <= 0.0):
        raise StateError("schedule produced a non-positive sigma_t")
    return s


@dataclass(frozen=True)
class ConditionalPath:
    schedule: PathSchedule
    kernel: KernelSpec
    anchor: tuple

    def __post_init__(self):
        y = np.asarray(self.anchor, dtype=float).reshape(-1)
        if y.shape[0] != self.kernel.dim:
            raise InputError("anchor dimension must equal kernel dimension")
        object.__setattr__(self, "anchor", tuple(y))

    @property
    def y(self):
        return np.asarray(self.anchor)

    def flow(self, t, z):
        """psi_t(z|y); ``z`` may be one vector or an (m, d) batch."""
        t = check_time(t)
        pts, single = as_points(z, self.kernel.dim)
        out = self.schedule.sigma(t)[..., None] * pts + self.schedule.mu(t, self.y)
        return out[0] if single else out

    def velocity(self, t, x):
        t = check_time(t)
        pts, single = as_points(x, self.kernel.dim)
        sig = _checked_sigma(self.schedule, t)
        rate = (self.schedule.sigma_dot(t) / sig)[..., None]
        out = rate * (pts - self.schedule.mu(t, self.y)) + self.schedule.mu_dot(t, self.y)
        return out[0] if single else out

    def density(self, t, x, log_scale=False):
        t = check_time(t)
        pts, single = as_points(x, self.kernel.dim)
        sig = _checked_sigma(self.schedule, t)
        u = (pts - self.schedule.mu(t, self.y)) / sig[..., None]
        logp = self.kernel.log_density(u) - self.kernel.dim * np.log(sig)
        if single:
            logp = logp[0]
        return logp if log_scale else np.exp(logp)


def cond_flow(cp, t, z):
    return cp.flow(t, z)


def cond_velocity(cp, t, x):
    return cp.velocity(t, x)


def cond_density(cp, t, x, log_scale=False):
    return cp.density(t, x, log_scale=log_scale)
