"""Kernel-path flow matching: conditional Gaussian paths, the empirical
vector field, ODE sampling, the equivalent kernel density estimator, W1/TV
metrics, a small trainable network field and the sine-curve manifold."""

from .empirical import Dataset, EmpiricalField, continuity_residual, emp_density, emp_velocity, field_bounds
from .errors import (
    ConfigError,
    EvaluationError,
    InputError,
    KernelFMError,
    NonConvergenceError,
    NumericalError,
    SizeError,
    StateError,
    TrainingError,
    UnsupportedError,
)
from .kde import KdeModel, bandwidth_rule, kde_density, kde_sample
from .kernel import KernelSpec, kernel_density, kernel_sample
from .manifold import SineChart, arc_w1, largest_gap, mean_distance, project, sample_manifold
from .metrics import Density1D, slope_fit, tv_1d, w1_1d, w1_assignment, w1_sliced
from .mlp import AdamState, MlpField, TrainConfig, adam_step, cfm_loss_and_grad, mlp_forward, train_cfm
from .ode import OdeConfig, Trajectory, integrate, integrate_batch, pointwise
from .paths import ConditionalPath, PathSchedule, cond_density, cond_flow, cond_velocity

__version__ = "0.1.0"
