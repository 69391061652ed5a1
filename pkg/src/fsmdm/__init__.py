"""Robust federated source localization with smoothed Moreau-envelope ADMM."""

from ._backend import BACKEND
from .baseline import SubgradConfig, run_dsrl
from .datagen import NoiseModel, apply_cauchy, apply_outliers, generate_network
from .diagnostics import kkt_residuals, rmse, validate_hyperparams
from .model import Hyperparams, SensorNetwork, objective
from .orchestrator import AsyncProfile, RunResult, run

__all__ = [
    "BACKEND",
    "AsyncProfile",
    "Hyperparams",
    "NoiseModel",
    "RunResult",
    "SensorNetwork",
    "SubgradConfig",
    "apply_cauchy",
    "apply_outliers",
    "generate_network",
    "kkt_residuals",
    "objective",
    "rmse",
    "run",
    "run_dsrl",
    "validate_hyperparams",
]

__version__ = "0.1.0"
