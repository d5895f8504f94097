"""SeLU feed-forward vector field trained with empirical conditional flow
matching.

The network maps (t, x_1, ..., x_d) to a velocity in R^d.  Gradients are
accumulated by hand (reverse mode through the affine/SeLU chain) and the
parameters are updated with Adam.  Everything is float64 numpy.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .empirical import Dataset
from .errors import InputError, StateError, TrainingError
from .kernel import KernelSpec, make_rng
from .paths import PathSchedule, check_time

SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

CHECKPOINT_FORMAT = "kernelfm-mlp"


def selu(a):
    return SELU_SCALE * np.where(a > 0, a, SELU_ALPHA * np.expm1(np.minimum(a, 0.0)))


def selu_grad(a):
    return SELU_SCALE * np.where(a > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(a, 0.0)))


class MlpField:
    """Affine-SeLU chain with a final affine layer (no activation).

    ``weights[l]`` has shape (fan_in, fan_out); the first fan_in is d + 1
    because time is concatenated in front of the spatial input.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or not weights:
            raise InputError("need one bias per weight matrix")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float).reshape(-1) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape[0] != w.shape[1]:
                raise InputError(f"layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise InputError(f"layer {i} does not chain onto layer {i - 1}")
        if self.weights[0].shape[0] != self.weights[-1].shape[1] + 1:
            raise InputError("input width must be output dimension + 1 (time concatenated)")

    @classmethod
    def init(cls, dim, widths=(512, 512, 512), seed=None):
        """LeCun-normal weights (variance 1/fan_in) and zero biases."""
        rng = make_rng(seed)
        sizes = [dim + 1, *widths, dim]
        weights = [rng.standard_normal((a, b)) / np.sqrt(a) for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        return cls(weights, biases)

    @property
    def dim(self):
        return self.weights[-1].shape[1]

    @property
    def widths(self):
        return tuple(w.shape[1] for w in self.weights[:-1])

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return MlpField([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _inputs(self, t, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise InputError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1, 1), (x.shape[0], 1))
        return np.hstack([t, x]), single

    def _forward(self, inp):
        pre, acts = [], [inp]
        h = inp
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = h @ w + b
            pre.append(a)
            h = selu(a)
            acts.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out, (pre, acts)

    def _backward(self, cache, g_out):
        """Parameter gradients given dLoss/dOutput, in ``params`` order."""
        pre, acts = cache
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        g = g_out
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ g
            grads_b[layer] = g.sum(axis=0)
            if layer:
                g = (g @ self.weights[layer].T) * selu_grad(pre[layer - 1])
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out += [gw, gb]
        return out

    def forward(self, t, x):
        check_time(t)
        if not all(np.all(np.isfinite(p)) for p in self.params):
            raise StateError("network parameters are not all finite")
        inp, single = self._inputs(t, x)
        out = self._forward(inp)[0]
        return out[0] if single else out

    __call__ = forward

    def save(self, path):
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "layers": [{"weight_shape": list(w.shape), "bias_shape": list(b.shape)}
                       for w, b in zip(self.weights, self.biases)],
        }
        body = {
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        Path(path).write_text(json.dumps({"header": header, **body}))

    @classmethod
    def load(cls, path):
        blob = json.loads(Path(path).read_text())
        header = blob.get("header", {})
        if header.get("format") != CHECKPOINT_FORMAT:
            raise InputError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
        weights = [np.array(w, dtype=float).reshape(layer["weight_shape"])
                   for w, layer in zip(blob["weights"], header["layers"])]
        biases = [np.array(b, dtype=float).reshape(layer["bias_shape"])
                  for b, layer in zip(blob["biases"], header["layers"])]
        return cls(weights, biases)


def mlp_forward(f, t, x):
    return f.forward(t, x)


def regression_loss_and_grad(net, t, x, target, weights=None):
    """Weighted squared error sum_j c_j |v(t_j, x_j) - target_j|^2 / sum_j c_j
    and its gradient with respect to every parameter."""
    inp, _ = net._inputs(t, x)
    out, cache = net._forward(inp)
    resid = out - np.asarray(target, dtype=float).reshape(out.shape)
    c = np.ones(len(out)) if weights is None else np.asarray(weights, dtype=float)
    total = c.sum()
    loss = float(np.sum(c * np.einsum("ij,ij->i", resid, resid)) / total)
    grads = net._backward(cache, (2.0 / total) * c[:, None] * resid)
    return loss, grads


def lipschitz_penalty_and_grad(net, t, x, delta, seed=None):
    """Finite-difference Jacobian penalty mean_j |v(x_j + delta u_j) - v(x_j)|^2 / delta^2
    with random unit directions u_j."""
    rng = make_rng(seed)
    u = rng.standard_normal(np.shape(x))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    inp0, _ = net._inputs(t, x)
    inp1, _ = net._inputs(t, np.asarray(x) + delta * u)
    out0, cache0 = net._forward(inp0)
    out1, cache1 = net._forward(inp1)
    diff = out1 - out0
    m = len(diff)
    pen = float(np.sum(diff * diff) / (m * delta**2))
    g = 2.0 * diff / (m * delta**2)
    grads = [a + b for a, b in zip(net._backward(cache1, g), net._backward(cache0, -g))]
    return pen, grads


@dataclass(frozen=True)
class CfmDraw:
    """One frozen draw of (t_i, x_i) per data point with its regression target."""

    t: np.ndarray
    x: np.ndarray
    target: np.ndarray


def draw_cfm_batch(data, schedule, kernel, seed=None, time_mode="per_point"):
    """t_i ~ U[0,1], z_i ~ K, x_i = psi_{t_i}(z_i | X_i), target = v_{t_i}(x_i | X_i)."""
    if time_mode not in ("per_point", "per_step"):
        raise InputError(f"unknown time mode {time_mode!r}")
    rng = make_rng(seed)
    pts = data.points
    n = len(pts)
    t = rng.random(n) if time_mode == "per_point" else np.full(n, rng.random())
    z = kernel.sample(n, rng)
    sig = schedule.sigma(t)
    mu = schedule.mu(t, pts)
    x = sig[:, None] * z + mu
    target = (schedule.sigma_dot(t) / sig)[:, None] * (x - mu) + schedule.mu_dot(t, pts)
    return CfmDraw(t, x, target)


def cfm_loss_and_grad(net, data, schedule, kernel, seed=None, time_mode="per_point", draw=None):
    """Empirical conditional flow-matching loss and gradient.

    Either pass ``draw`` (frozen) or a ``seed`` for a fresh draw.
    """
    if not isinstance(data, Dataset):
        data = Dataset(data)
    if draw is None:
        draw = draw_cfm_batch(data, schedule, kernel, seed, time_mode)
    return regression_loss_and_grad(net, draw.t, draw.x, draw.target)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 40_000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoints: tuple = (10_000, 20_000, 30_000, 40_000)
    log_every: int = 100
    time_mode: str = "per_point"
    lipschitz_penalty: float = 0.0
    lipschitz_delta: float = 1e-3

    def __post_init__(self):
        if self.steps < 0:
            raise InputError("steps must be nonnegative")
        if not self.lr > 0:
            raise InputError("learning rate must be positive")
        if self.log_every < 1:
            raise InputError("log_every must be positive")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state, cfg=None):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    cfg = cfg or TrainConfig()
    state.step += 1
    c1 = 1.0 - cfg.beta1**state.step
    c2 = 1.0 - cfg.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


@dataclass
class TrainResult:
    net: MlpField
    losses: np.ndarray  # rows (step, mean loss over the preceding log_every steps)
    checkpoints: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.net, self.losses))


def train_cfm(data, schedule=None, kernel=None, widths=(512, 512, 512), cfg=None, net=None):
    """Full-batch flow-matching training: every step uses one fresh (t, z)
    pair per data point, then one Adam update."""
    cfg = cfg or TrainConfig()
    if not isinstance(data, Dataset):
        data = Dataset(data)
    schedule = schedule or PathSchedule()
    kernel = kernel or KernelSpec("gaussian", data.dim)
    if kernel.dim != data.dim:
        raise InputError("kernel dimension must equal data dimension")
    root = np.random.SeedSequence(cfg.seed)
    init_seq, draw_seq = root.spawn(2)
    net = net.copy() if net is not None else MlpField.init(data.dim, widths, init_seq)
    if net.dim != data.dim:
        raise InputError("network output dimension must equal data dimension")
    rng = np.random.default_rng(draw_seq)
    params = net.params
    state = AdamState.zeros_like(params)
    wanted = set(int(c) for c in cfg.checkpoints)
    checkpoints = {}
    losses = []
    block = 0.0
    for step in range(1, cfg.steps + 1):
        draw = draw_cfm_batch(data, schedule, kernel, rng, cfg.time_mode)
        loss, grads = regression_loss_and_grad(net, draw.t, draw.x, draw.target)
        if cfg.lipschitz_penalty > 0:
            pen, pgrads = lipschitz_penalty_and_grad(net, draw.t, draw.x, cfg.lipschitz_delta, rng)
            loss += cfg.lipschitz_penalty * pen
            grads = [g + cfg.lipschitz_penalty * pg for g, pg in zip(grads, pgrads)]
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at step {step}", step=step)
        adam_step(params, grads, state, cfg)
        block += loss
        if step % cfg.log_every == 0:
            losses.append((step, block / cfg.log_every))
            block = 0.0
        if step in wanted:
            checkpoints[step] = net.copy()
    return TrainResult(net, np.array(losses).reshape(-1, 2), checkpoints)
