"""Flow of the oscillating one-dimensional field v(x) = eps * sin(x / eps).

The flow stays within eps of the identity in sup norm, so W1 between the
latent law and its push-forward is at most eps, yet the push-forward
density keeps O(1) oscillations and its total variation distance to the
latent law does not vanish as eps -> 0.
"""

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from ..errors import InputError


def _check_eps(eps):
    if not 0 < eps <= 0.5:
        raise InputError(f"eps must lie in (0, 0.5], got {eps}")


def oscillating_field(eps):
    _check_eps(eps)
    return lambda t, x: eps * np.sin(np.asarray(x) / eps)


def oscillating_flow(x, eps, t=1.0):
    """Closed-form solution of dx/dt = eps sin(x / eps) started at x."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    branch = np.floor(x / (2 * np.pi * eps) + 0.5)
    return 2 * eps * np.arctan(np.exp(t) * np.tan(x / (2 * eps))) + 2 * np.pi * eps * branch


def oscillating_flow_derivative(x, eps, t=1.0):
    _check_eps(eps)
    s = np.sin(np.asarray(x, dtype=float) / (2 * eps))
    return np.exp(t) / ((np.exp(2 * t) - 1) * s * s + 1)


def pulled_back_density(x, eps, t=1.0):
    """phi(psi(x)) psi'(x): density of psi^{-1}(Z).  Since psi is a
    bijection, its TV distance to phi equals TV(Z, psi(Z))."""
    return norm.pdf(oscillating_flow(x, eps, t)) * oscillating_flow_derivative(x, eps, t)


def tv_lower_bound():
    """Lower bound on liminf_{eps -> 0} TV(Z, psi_1(Z)) from the intervals
    on which psi_1' <= 1/2.  Not sharp; see ``tv_limit``."""
    e = np.e
    gamma = np.arcsin(np.sqrt((2 * e - 1) / (e * e - 1)))
    return float((np.pi - 2 * gamma) / (np.pi * np.sqrt(2 * np.pi * e)))


def tv_limit(points=200_001):
    """Exact eps -> 0 limit of TV(Z, psi_1(Z)): the fast phase decouples
    from phi, leaving half the phase average of |psi_1' - 1|."""
    theta = np.linspace(0.0, np.pi, points)
    e = np.e
    dev = np.abs(e / ((e * e - 1) * np.sin(theta) ** 2 + 1) - 1)
    return float(0.5 * trapezoid(dev, theta) / np.pi)
