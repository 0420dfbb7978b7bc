"""Pieces shared by both FLAME solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import (
    FunctionalMargins,
    InvalidArgument,
    LabeledDataset,
    LinearModel,
    flame_loss,
    zero_branch_start,
)


@dataclass(frozen=True)
class FitDiagnostics:
    """Convergence summary of one fit.

    ``primal_residual`` and ``dual_residual`` are the relative cone-program
    residuals for the interior-point solver; for the subgradient solver the
    primal residual is 0 (the problem is unconstrained) and the dual residual
    is the optimality certificate (norm of the minimum-norm subgradient).
    ``multiplier`` is the dual value of ``||w|| <= 1`` (norm-ball fits only).
    ``history`` holds the best-so-far objective per iteration (subgradient
    solver only).
    """

    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    gap: float = 0.0
    multiplier: Optional[float] = None
    status: str = ""
    history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "gap": self.gap,
            "converged": self.converged,
            "multiplier": self.multiplier,
            "status": self.status,
        }


def decision_value(model: LinearModel, x) -> float:
    """``x'w + beta`` for a single sample."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.d:
        raise InvalidArgument(
            f"sample has shape {x.shape}, expected a vector of length {model.d}"
        )
    return float(x @ model.direction + model.intercept)


def functional_margins(model: LinearModel, data: LabeledDataset) -> FunctionalMargins:
    """``u_i = y_i (x_i'w + beta)`` for every sample of ``data``."""
    if data.d != model.d:
        raise InvalidArgument(f"model has {model.d} features, data has {data.d}")
    return FunctionalMargins(data.labels * model.decision_function(data.features), data.labels)


def sum_loss(model: LinearModel, data: LabeledDataset, C: float, theta: float) -> float:
    """Total FLAME loss, the quantity the norm-ball formulation minimises."""
    u = functional_margins(model, data).values
    return float(np.sum(flame_loss(u, C, theta)))


def penalized_objective(model: LinearModel, data: LabeledDataset, C: float, theta: float, lam: float) -> float:
    """Mean FLAME loss plus ``(lam/2)||w||^2``."""
    u = functional_margins(model, data).values
    w = model.direction
    return float(np.mean(flame_loss(u, C, theta)) + 0.5 * lam * (w @ w))


def row_space_basis(X: np.ndarray):
    """Orthonormal basis of the row space of ``X`` when ``d`` exceeds ``n``.

    Both formulations have an optimal direction in the span of the samples,
    so a fit in the reduced coordinates ``X V`` loses nothing.  Returns
    ``None`` when no reduction is worthwhile.
    """
    n, d = X.shape
    if d <= n + 1:
        return None
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    keep = s > s[0] * max(n, d) * np.finfo(float).eps if s.size and s[0] > 0 else np.zeros(0, bool)
    if not np.any(keep):
        return np.zeros((d, 1))
    return vt[keep].T


def canonical_intercept(z: np.ndarray, y: np.ndarray, C: float, theta: float, beta: float) -> float:
    """Pick the midpoint of the optimal intercept interval when it is not unique.

    With the direction fixed, ``h(b) = sum_i L(y_i (z_i + b))`` is convex and
    piecewise smooth in ``b``.  On a piece where no sample is on the
    reciprocal branch, ``h`` is linear with slope ``-C (#pos - #neg)`` over the
    samples on the linear branch, so a flat stretch is detected by an integer
    count rather than by a floating-point comparison.  If ``beta`` lies on
    such a flat stretch (which only happens when ``theta`` is at or near 1),
    every point of the stretch is optimal and the midpoint is returned; in
    every other case ``beta`` is returned unchanged.
    """
    rc = math.sqrt(C)
    knee = 1.0 / rc
    k = zero_branch_start(C, theta)
    ts = [knee] if not math.isfinite(k) or k == knee else [knee, k]
    breaks = np.unique(np.concatenate([y * t - z for t in ts]))
    if breaks.size == 0:
        return beta
    lo_edges = np.concatenate([[-np.inf], breaks])
    hi_edges = np.concatenate([breaks, [np.inf]])
    mids = np.where(
        np.isinf(lo_edges), hi_edges - 1.0,
        np.where(np.isinf(hi_edges), lo_edges + 1.0, 0.5 * (lo_edges + hi_edges)),
    )
    u = y[None, :] * (z[None, :] + mids[:, None])
    linear = u < knee
    recip = (~linear) & (u < k)
    counts = np.where(linear, y[None, :], 0).sum(axis=1)
    flat = (~recip.any(axis=1)) & (counts == 0)
    if not flat.any():
        return beta
    scale = 1e-9 * (1.0 + abs(beta) + float(np.max(np.abs(breaks))))
    idx = np.flatnonzero(flat)
    # merge adjacent flat pieces into runs
    runs = []
    start = prev = idx[0]
    for j in idx[1:]:
        if j == prev + 1:
            prev = j
            continue
        runs.append((start, prev))
        start = prev = j
    runs.append((start, prev))
    for a, b in runs:
        lo, hi = lo_edges[a], hi_edges[b]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            continue
        if lo - scale <= beta <= hi + scale:
            return float(0.5 * (lo + hi))
    return beta
