"""Experiment configuration: an INI file whose values are JSON literals.

    [experiment]
    experiment = "rate"
    seed = 0
    repeats = 10

    [data]
    n_values = [128, 256, 512]
"""

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, fields

from ..errors import ConfigError

EXPERIMENTS = ("rate", "rate_manifold", "flow_vs_kde", "tv_example", "bounds_check", "manifold_run")

_SECTIONS = {
    "experiment": ("experiment", "seed", "repeats", "out_dir"),
    "data": ("dim", "density", "n_values", "rate_n_values", "sample_size", "rate_sample_size", "sampling", "mode", "tube_radius"),
    "bandwidth": ("sigma_policy", "sigma_values", "alpha", "d_eff", "log_correction", "kernel", "bias_only"),
    "net": ("arms", "widths", "steps", "checkpoints", "lr", "time_mode", "lipschitz_penalty"),
    "ode": ("ode_method", "atol", "rtol", "max_steps"),
    "tv": ("epsilons", "mc_draws", "grid_points_per_period", "tv_half_width"),
    "bounds": ("dims", "box_half_width", "bound_points", "include_rate"),
}
_SECTION_OF = {key: sec for sec, keys in _SECTIONS.items() for key in keys}

_CHOICES = {
    "experiment": EXPERIMENTS,
    "sigma_policy": ("explicit", "bandwidth_rule"),
    "sampling": ("stratified", "iid"),
    "density": ("trapezoid", "truncated_gaussian", "raised_cosine", "sine_curve"),
    "mode": ("arc_uniform", "x_uniform"),
    "kernel": ("gaussian", "uniform_product"),
    "time_mode": ("per_point", "per_step"),
    "ode_method": ("dopri5", "rk4_fixed"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "rate"
    seed: int = 0
    repeats: int = 10
    out_dir: str = "results"

    dim: int = 2
    density: str = "trapezoid"
    n_values: tuple = (128, 256, 512, 1024, 2048, 4096, 8192)
    rate_n_values: tuple = (128, 256, 512, 1024, 2048, 4096)
    sample_size: int = 1024
    rate_sample_size: int = 4096
    sampling: str = "stratified"
    mode: str = "arc_uniform"
    tube_radius: float = 0.25

    sigma_policy: str = "bandwidth_rule"
    sigma_values: tuple = (0.1,)
    alpha: float = 1.0
    d_eff: int = 0  # 0 means "use the data dimension"
    log_correction: bool = False
    kernel: str = "gaussian"
    bias_only: bool = False

    arms: tuple = ("kde", "fm")
    widths: tuple = (512, 512, 512)
    steps: int = 40_000
    checkpoints: tuple = (10_000, 20_000, 30_000, 40_000)
    lr: float = 1e-3
    time_mode: str = "per_point"
    lipschitz_penalty: float = 0.0

    ode_method: str = "dopri5"
    atol: float = 1e-5
    rtol: float = 1e-5
    max_steps: int = 10_000

    epsilons: tuple = (0.1, 0.03, 0.01)
    mc_draws: int = 100_000
    grid_points_per_period: int = 200
    tv_half_width: float = 8.0

    dims: tuple = (1, 2)
    box_half_width: float = 2.0
    bound_points: int = 1000
    include_rate: bool = False

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            default = f.default
            if isinstance(default, tuple):
                if isinstance(value, list):
                    value = tuple(value)
                    object.__setattr__(self, f.name, value)
                if not isinstance(value, tuple) or not value:
                    raise ConfigError(f"{f.name} must be a nonempty list")
                if default and isinstance(default[0], (int, float)):
                    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                        raise ConfigError(f"{f.name} must hold numbers")
                    if isinstance(default[0], float):
                        object.__setattr__(self, f.name, tuple(float(v) for v in value))
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"{f.name} must be true or false")
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{f.name} must be an integer")
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{f.name} must be a number")
                object.__setattr__(self, f.name, float(value))
            elif isinstance(default, str) and not isinstance(value, str):
                raise ConfigError(f"{f.name} must be a string")
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.sample_size < 1 or self.dim < 1 or self.steps < 0:
            raise ConfigError("sample_size and dim must be positive, steps nonnegative")
        if any(n < 1 for n in self.n_values + self.rate_n_values):
            raise ConfigError("every n must be positive")
        if any(s <= 0 for s in self.sigma_values):
            raise ConfigError("every sigma must be positive")
        if any(not 0 < e <= 0.5 for e in self.epsilons):
            raise ConfigError("every eps must lie in (0, 0.5]")
        if any(a not in ("kde", "fm") for a in self.arms):
            raise ConfigError("arms must be drawn from 'kde' and 'fm'")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def effective_dim(self):
        return self.d_eff or self.dim


def emit_config(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    for sec, keys in _SECTIONS.items():
        parser[sec] = {key: json.dumps(getattr(cfg, key)) for key in keys}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _decode(key, raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if isinstance(ExperimentConfig.__dataclass_fields__[key].default, str):
            return raw.strip().strip("'\"")
        raise ConfigError(f"cannot parse value for {key}: {raw!r}") from None


def parse_config(text, base=None):
    """Read an INI text on top of ``base`` (defaults when omitted)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    changes = {}
    for sec in parser.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser[sec].items():
            if _SECTION_OF.get(key) != sec:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            changes[key] = _decode(key, raw)
    base = base or ExperimentConfig()
    try:
        return dataclasses.replace(base, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def apply_overrides(cfg, assignments):
    """Apply ``key=value`` strings (value as JSON literal)."""
    changes = {}
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in _SECTION_OF:
            raise ConfigError(f"unknown key {key!r}")
        changes[key] = _decode(key, raw)
    return dataclasses.replace(cfg, **changes)


def config_hash(cfg):
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()[:16]


def default_config(experiment):
    """Default sizes and settings for each experiment."""
    base = ExperimentConfig(experiment=experiment)
    if experiment == "rate":
        return base
    if experiment == "rate_manifold":
        return base.replace(dim=2, density="sine_curve", n_values=(128, 256, 512, 1024, 2048, 4096),
                            sample_size=4096, d_eff=1)
    if experiment == "flow_vs_kde":
        return base.replace(n_values=(200,), sigma_policy="explicit", sigma_values=(0.1,),
                            repeats=20, sampling="iid")
    if experiment == "tv_example":
        return base.replace(dim=1, repeats=1)
    if experiment == "bounds_check":
        return base.replace(n_values=(50,), sigma_policy="explicit", sigma_values=(0.1,), repeats=1)
    if experiment == "manifold_run":
        return base.replace(density="sine_curve", n_values=(200,), sigma_policy="explicit",
                            sigma_values=(0.5, 0.1, 0.05, 0.01), sample_size=512, d_eff=1)
    raise ConfigError(f"unknown experiment {experiment!r}")
