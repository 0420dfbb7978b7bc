"""Norm-ball FLAME fit: minimise the summed loss subject to ``||w|| <= 1``."""
from __future__ import annotations

import math

import numpy as np

from ..core import FlameConfig, Formulation, InvalidArgument, LabeledDataset, LinearModel, flame_loss
from ._common import FitDiagnostics, canonical_intercept, row_space_basis
from .socp import SocpProblem, solve_socp

__all__ = ["fit_socp"]


def fit_socp(data: LabeledDataset, config: FlameConfig):
    """Fit FLAME through its second-order cone formulation.

    The features are rescaled by ``sqrt(C)`` internally (which turns the
    problem into the ``C = 1`` case with intercept ``sqrt(C) beta``), and when
    ``d > n + 1`` the fit runs in an orthonormal basis of the sample span.
    ``diagnostics.multiplier`` is the Lagrange multiplier ``nu`` of
    ``||w||^2 <= 1`` written as ``(nu/2)(||w||^2 - 1)``; when the constraint is
    active, the penalized problem with ``lam = nu / n`` has the same solution.

    Returns ``(LinearModel, FitDiagnostics)``.
    """
    if config.formulation is not Formulation.NORM_BALL:
        raise InvalidArgument("fit_socp requires formulation=norm_ball")
    data.require_both_classes()
    cfg = config.resolve(data)
    C, theta = cfg.C, cfg.theta
    rc = math.sqrt(C)

    basis = row_space_basis(data.features)
    Xr = data.features if basis is None else data.features @ basis
    y = data.labels.astype(float)
    sol = solve_socp(SocpProblem(Xr * rc, y, 1.0, theta), tol=cfg.resolved_tol,
                     max_iter=cfg.resolved_max_iter)
    dr = Xr.shape[1]
    w_r = sol.x[:dr]
    direction = w_r if basis is None else basis @ w_r
    beta = float(sol.x[dr]) / rc
    beta = canonical_intercept(data.features @ direction, y, C, theta, beta)
    model = LinearModel(direction, beta, cfg)
    u = y * (data.features @ direction + beta)
    diag = FitDiagnostics(
        objective=float(np.sum(flame_loss(u, C, theta))),
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        gap=sol.gap,
        converged=sol.converged,
        multiplier=rc * sol.multiplier,
        status=sol.status,
    )
    return model, diag
