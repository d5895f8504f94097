"""Forward integration of dx/dt = v_t(x) on [0, 1].

Fields are batched callables ``field(t, x)`` taking a vector of times of
shape (k,) and states of shape (k, d) and returning velocities of shape
(k, d).  ``pointwise`` adapts a per-point function to that convention.

Batched integration keeps a separate time, step size and error control for
each start; rows are only advanced together for the sake of vectorisation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, InputError, NonConvergenceError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_LOW

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass(frozen=True)
class OdeConfig:
    method: str = "dopri5"
    atol: float = 1e-5
    rtol: float = 1e-5
    max_steps: int = 10_000
    fixed_step_count: int = 100
    max_step: float = 1.0

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4_fixed"):
            raise InputError(f"unknown ODE method {self.method!r}")
        if not (self.atol > 0 and self.rtol > 0):
            raise InputError("atol and rtol must be positive")
        if self.max_steps < 1 or self.fixed_step_count < 1:
            raise InputError("step counts must be positive")
        if not self.max_step > 0:
            raise InputError("max_step must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def endpoint(self):
        return self.states[-1]


@dataclass
class _Batch:
    t: np.ndarray
    x: np.ndarray
    h: np.ndarray
    f: np.ndarray
    accepted: np.ndarray
    rejected: np.ndarray
    knots: list = field(default_factory=list)


def pointwise(fn):
    """Wrap ``fn(t: float, x: 1-d array) -> 1-d array`` as a batched field."""

    def batched(t, x):
        return np.stack([np.asarray(fn(float(ti), xi), dtype=float) for ti, xi in zip(t, x)])

    return batched


def _call(field_fn, t, x, rows):
    out = np.asarray(field_fn(t, x), dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape).astype(float)
    bad = ~np.all(np.isfinite(out), axis=1)
    if np.any(bad):
        idx = rows[bad].tolist()
        raise NonFiniteField(f"field returned non-finite values for starts {idx}", idx)
    return out


class NonFiniteField(EvaluationError):
    def __init__(self, message, indices):
        super().__init__(message)
        self.indices = indices


def _rms(v):
    return np.sqrt(np.mean(v * v, axis=1))


def _initial_step(field_fn, x0, f0, cfg, rows):
    scale = cfg.atol + cfg.rtol * np.abs(x0)
    d0 = _rms(x0 / scale)
    d1 = _rms(f0 / scale)
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h0 = np.minimum(h0, cfg.max_step)
    x1 = x0 + h0[:, None] * f0
    f1 = _call(field_fn, h0, x1, rows)
    d2 = _rms((f1 - f0) / scale) / h0
    dmax = np.maximum(d1, d2)
    flat = dmax <= 1e-15
    h1 = (0.01 / np.where(flat, 1.0, dmax)) ** 0.2
    h = np.minimum(100 * h0, h1)
    # locally trivial dynamics: try the whole interval and let error control cut it
    h = np.where(flat, cfg.max_step, h)
    return np.minimum(h, cfg.max_step)


def _dopri5(field_fn, x0, cfg, record):
    m, d = x0.shape
    rows = np.arange(m)
    f0 = _call(field_fn, np.zeros(m), x0, rows)
    st = _Batch(
        t=np.zeros(m),
        x=x0.copy(),
        h=_initial_step(field_fn, x0, f0, cfg, rows),
        f=f0,
        accepted=np.zeros(m, dtype=int),
        rejected=np.zeros(m, dtype=int),
    )
    if record:
        st.knots.append((0.0, x0[0].copy()))
    active = np.ones(m, dtype=bool)
    attempts = 0
    while np.any(active):
        idx = rows[active]
        t, x, f = st.t[idx], st.x[idx], st.f[idx]
        remaining = 1.0 - t
        h = np.minimum(st.h[idx], remaining)
        last = h >= remaining
        k = [f]
        for s in range(1, 7):
            xs = x + h[:, None] * sum(a * kk for a, kk in zip(_A[s], k) if a != 0.0)
            ts = np.where(last, 1.0, t + _C[s] * h) if s >= 5 else t + _C[s] * h
            k.append(_call(field_fn, ts, xs, idx))
        x_new = x + h[:, None] * sum(b * kk for b, kk in zip(_B, k) if b != 0.0)
        err = h[:, None] * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(x), np.abs(x_new))
        enorm = _rms(err / scale)
        ok = enorm <= 1.0
        with np.errstate(divide="ignore"):
            factor = _SAFETY * np.where(enorm > 0, enorm, 1e-300) ** -0.2
        factor = np.clip(factor, _MIN_FACTOR, _MAX_FACTOR)
        factor = np.where(ok, factor, np.minimum(factor, 1.0))

        acc = idx[ok]
        st.t[acc] = np.where(last[ok], 1.0, t[ok] + h[ok])
        st.x[acc] = x_new[ok]
        st.f[acc] = k[6][ok]
        st.accepted[acc] += 1
        st.rejected[idx[~ok]] += 1
        st.h[idx] = np.minimum(h * factor, cfg.max_step)
        if record and ok[0]:
            st.knots.append((float(st.t[0]), st.x[0].copy()))
        active = st.t < 1.0
        attempts += 1

        tiny = active & (st.h < 1e-14)
        over = active & (st.accepted + st.rejected >= cfg.max_steps)
        if np.any(tiny | over):
            bad = rows[tiny | over]
            partial = _trajectory(st, record) if record else None
            raise NonConvergenceError(
                f"dopri5 did not reach t=1 for starts {bad.tolist()} "
                f"(max_steps={cfg.max_steps})",
                trajectory=partial,
                indices=bad,
            )
    return st


def _trajectory(st, record):
    times = np.array([k[0] for k in st.knots])
    states = np.array([k[1] for k in st.knots])
    return Trajectory(times, states, int(st.accepted[0]), int(st.rejected[0]))


def _rk4(field_fn, x0, cfg, record):
    m, _ = x0.shape
    rows = np.arange(m)
    n = cfg.fixed_step_count
    h = 1.0 / n
    x = x0.copy()
    knots = [(0.0, x0[0].copy())]
    for i in range(n):
        t = np.full(m, i * h)
        k1 = _call(field_fn, t, x, rows)
        k2 = _call(field_fn, t + h / 2, x + h / 2 * k1, rows)
        k3 = _call(field_fn, t + h / 2, x + h / 2 * k2, rows)
        k4 = _call(field_fn, np.full(m, (i + 1) * h) if i + 1 < n else np.ones(m), x + h * k3, rows)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if record:
            knots.append(((i + 1) * h if i + 1 < n else 1.0, x[0].copy()))
    st = _Batch(t=np.ones(m), x=x, h=np.full(m, h), f=None,
                accepted=np.full(m, n), rejected=np.zeros(m, dtype=int), knots=knots)
    return st


def _run(field_fn, starts, cfg, record):
    if cfg.method == "dopri5":
        return _dopri5(field_fn, starts, cfg, record)
    return _rk4(field_fn, starts, cfg, record)


def integrate(field_fn, x0, cfg=None):
    """Integrate a single start from t=0 to t=1 and keep every accepted knot."""
    cfg = cfg or OdeConfig()
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    st = _run(field_fn, x0, cfg, record=True)
    return _trajectory(st, True)


def integrate_batch(field_fn, starts, cfg=None):
    """Endpoints psi_1(x) for every row of ``starts``.

    Each start has its own adaptive step sequence, so the result for a row
    does not depend on which other rows are in the batch.
    """
    cfg = cfg or OdeConfig()
    starts = np.asarray(starts, dtype=float)
    if starts.size == 0:
        return np.zeros((0,) + starts.shape[1:]) if starts.ndim == 2 else np.zeros((0, 0))
    if starts.ndim != 2:
        raise InputError("starts must be an (m, d) array")
    return _run(field_fn, starts, cfg, record=False).x
