"""Multi-scale neural networks with compact-support activations for
function fitting and high-dimensional Poisson problems."""

__version__ = "0.1.0"

from .activations import ActivationKind, act_deriv1, act_deriv2, act_value
from .config import ExperimentConfig, load_config
from .errors import CapabilityError, ConfigError, NonFiniteLossError, ShapeError
from .network import (
    DerivBundle,
    Network,
    NetworkSpec,
    ParamGradient,
    build_scale_vector,
    forward,
    forward_bundle,
    init_network,
    load_checkpoint,
    objective_param_gradient,
    save_checkpoint,
)
from .optimizer import AdamState, LrSchedule, adam_step, lr_at
from .losses import fit_mse_loss, lse_loss, mse_vs_true, ritz_loss
from .problems import FitTarget, PoissonProblem, eval_target, sine_poisson

__all__ = [
    "ActivationKind",
    "AdamState",
    "CapabilityError",
    "ConfigError",
    "DerivBundle",
    "ExperimentConfig",
    "FitTarget",
    "LrSchedule",
    "Network",
    "NetworkSpec",
    "NonFiniteLossError",
    "ParamGradient",
    "PoissonProblem",
    "ShapeError",
    "act_deriv1",
    "act_deriv2",
    "act_value",
    "adam_step",
    "build_scale_vector",
    "eval_target",
    "fit_mse_loss",
    "forward",
    "forward_bundle",
    "init_network",
    "load_checkpoint",
    "load_config",
    "lr_at",
    "lse_loss",
    "mse_vs_true",
    "objective_param_gradient",
    "ritz_loss",
    "save_checkpoint",
    "sine_poisson",
]
