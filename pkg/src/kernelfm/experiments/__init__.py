from .config import ExperimentConfig, apply_overrides, config_hash, default_config, emit_config, parse_config
from .records import RunRecord, arm_rng, arm_seed
from .runners import (
    run_bounds_check,
    run_experiment,
    run_flow_vs_kde,
    run_manifold_experiment,
    run_manifold_rate,
    run_rate_experiment,
    run_tv_example,
)
