"""Solvers for the two FLAME formulations plus model evaluation helpers."""
from __future__ import annotations

from ..core import FlameConfig, Formulation, LabeledDataset
from ._common import (
    FitDiagnostics,
    canonical_intercept,
    decision_value,
    functional_margins,
    penalized_objective,
    sum_loss,
)
from .norm_ball import fit_socp
from .penalized import fit_penalized
from .socp import SocpProblem, SocpSolution, solve_socp

__all__ = [
    "FitDiagnostics",
    "SocpProblem",
    "SocpSolution",
    "solve_socp",
    "fit",
    "fit_socp",
    "fit_penalized",
    "decision_value",
    "functional_margins",
    "sum_loss",
    "penalized_objective",
    "canonical_intercept",
    "formulation_objective",
]


def fit(data: LabeledDataset, config: FlameConfig):
    """Dispatch to the solver matching ``config.formulation``."""
    if config.formulation is Formulation.PENALIZED:
        return fit_penalized(data, config)
    return fit_socp(data, config)


def formulation_objective(model, data: LabeledDataset, config: FlameConfig) -> float:
    """Per-sample objective of the formulation in ``config``.

    Penalized: mean loss + (lam/2)||w||^2.  Norm ball: mean loss (the
    constraint has no objective term).  ``config.C`` must be resolved.
    """
    C = config.C if config.C is not None else model.config.C
    if config.formulation is Formulation.PENALIZED:
        return penalized_objective(model, data, C, config.theta, config.lam)
    return sum_loss(model, data, C, config.theta) / data.n
