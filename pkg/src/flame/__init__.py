"""FLAME: a family of linear large-margin classifiers between DWD and SVM."""
from __future__ import annotations

from .core import (
    DataError,
    FlameConfig,
    FlameError,
    Formulation,
    FunctionalMargins,
    InvalidArgument,
    LabeledDataset,
    LinearModel,
    SolverFailure,
    default_C,
    dwd_loss,
    flame_loss,
    flame_subgradient,
    modified_hinge,
)
from .dataio import load_csv, load_model, save_model, variance_ratio_filter
from .metrics import MetricRecord, evaluate_model
from .solver import (
    FitDiagnostics,
    decision_value,
    fit,
    fit_penalized,
    fit_socp,
    functional_margins,
)
from .tuning import adaptive_theta, equal_tradeoff_theta

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "FlameConfig",
    "FlameError",
    "Formulation",
    "FunctionalMargins",
    "InvalidArgument",
    "LabeledDataset",
    "LinearModel",
    "SolverFailure",
    "default_C",
    "dwd_loss",
    "flame_loss",
    "flame_subgradient",
    "modified_hinge",
    "load_csv",
    "load_model",
    "save_model",
    "variance_ratio_filter",
    "MetricRecord",
    "evaluate_model",
    "FitDiagnostics",
    "decision_value",
    "fit",
    "fit_penalized",
    "fit_socp",
    "functional_margins",
    "adaptive_theta",
    "equal_tradeoff_theta",
    "__version__",
]
