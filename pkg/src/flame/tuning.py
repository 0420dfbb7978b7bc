"""Choosing the FLAME parameter theta.

Two rules are provided:

* the adaptive iteration, which moves theta up until the majority-class
  margin of rank ``n+`` sits at the turning point ``1/(theta sqrt C)`` of the
  loss, so that roughly ``n+`` majority samples keep a positive loss;
* the equal-trade-off rule, which locates the grid value where the min-max
  normalised cross-validated error curve meets the normalised RankComp curve.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import FlameConfig, InvalidArgument, LabeledDataset, LinearModel, SolverFailure
from .crossval import CvConfig, cv_error, run_folds
from .metrics import rank_comp
from .solver import fit, formulation_objective, functional_margins

__all__ = [
    "AdaptiveStep",
    "AdaptiveTrace",
    "adaptive_theta",
    "theta_update",
    "TradeoffCurves",
    "normalize_curve",
    "select_crossing",
    "equal_tradeoff_theta",
]


# --------------------------------------------------------------------------
# adaptive iteration
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AdaptiveStep:
    """One fit of the iteration: the fit at ``theta`` and its statistics."""

    theta: float
    direction: np.ndarray = field(repr=False)
    intercept: float
    objective: float
    g_order: float
    next_theta: float


@dataclass(frozen=True)
class AdaptiveTrace:
    """All steps of one run; ``terminated`` is False when ``max_steps`` was hit."""

    steps: tuple
    terminated: bool
    C: float

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.steps])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([s.objective for s in self.steps])

    @property
    def g_orders(self) -> np.ndarray:
        return np.array([s.g_order for s in self.steps])

    @property
    def final_theta(self) -> float:
        return self.steps[-1].next_theta if self.steps else 0.0

    def to_records(self) -> list:
        return [
            {"step": k, "theta": s.theta, "objective": s.objective, "g_order": s.g_order,
             "next_theta": s.next_theta, "intercept": s.intercept}
            for k, s in enumerate(self.steps)
        ]


def theta_update(theta: float, g_order: float, C: float) -> float:
    """``min(1, max(theta, 1/(g sqrt C)))``; a non-positive ``g`` maps to 1."""
    if not g_order > 0:
        return 1.0
    return min(1.0, max(theta, 1.0 / (g_order * math.sqrt(C))))


def adaptive_theta(data: LabeledDataset, config: FlameConfig, max_steps: int = 50,
                   theta_tol: float = 1e-5):
    """Run the adaptive iteration from ``theta = 0``.

    Each step fits at ``theta_k``, takes ``g``, the ``n+``-th smallest
    functional margin of the majority (negative) class, and sets
    ``theta_{k+1} = min(1, max(theta_k, 1/(g sqrt C)))``.  The run stops when
    ``theta_{k+1} - theta_k <= theta_tol`` or after ``max_steps`` fits;
    ``max_steps=1`` is the one-step variant.  Returns ``(theta_{k+1},
    AdaptiveTrace)``.

    ``theta_tol=0`` asks for exact equality.  That is only reached when the
    rank-``n+`` majority sample sits exactly on the kink of the fitted loss;
    otherwise the iterates approach the fixed point continuously and a
    floating-point solver would keep producing tiny increases, so a small
    tolerance is the default.

    The recorded objective is that of the formulation being fitted (penalized
    objective, or mean loss for the norm-ball form).  Both are
    non-increasing along the run because the loss decreases in ``theta`` and
    each fit minimises its own objective.

    A solver failure is re-raised as :class:`SolverFailure` whose ``partial``
    attribute carries the trace up to that point.
    """
    if int(max_steps) != max_steps or max_steps < 1:
        raise InvalidArgument("max_steps must be a positive integer")
    if not theta_tol >= 0:
        raise InvalidArgument("theta_tol must be nonnegative")
    data.require_both_classes()
    if data.n_pos > data.n_neg:
        raise InvalidArgument(
            f"the positive class must be the minority (n+={data.n_pos} > n-={data.n_neg}); relabel first"
        )
    cfg = config.resolve(data)
    C = cfg.C
    theta = 0.0
    steps = []
    terminated = False
    for _ in range(int(max_steps)):
        step_cfg = cfg.with_(theta=theta)
        try:
            model, _ = fit(data, step_cfg)
        except SolverFailure as exc:
            raise SolverFailure(
                f"fit failed at theta={theta:g}: {exc}", diagnostics=exc.diagnostics,
                partial=AdaptiveTrace(tuple(steps), False, C),
            ) from exc
        margins = functional_margins(model, data)
        g = margins.order_statistic(data.n_pos, label=-1)
        nxt = theta_update(theta, g, C)
        steps.append(AdaptiveStep(
            theta=theta, direction=model.direction, intercept=model.intercept,
            objective=formulation_objective(model, data, step_cfg), g_order=g, next_theta=nxt,
        ))
        if nxt - theta <= theta_tol:
            terminated = True
            break
        theta = nxt
    trace = AdaptiveTrace(tuple(steps), terminated, C)
    return trace.final_theta, trace


# --------------------------------------------------------------------------
# equal trade-off
# --------------------------------------------------------------------------
def normalize_curve(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant curve maps to all zeros."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def select_crossing(grid, error_norm, rank_norm):
    """Theta where the normalised curves meet; returns ``(theta, crossed)``.

    Scanning from the smallest theta, the first grid point where the curves
    are equal is returned, otherwise the first sign change of their
    difference is located by linear interpolation.  Without any crossing,
    the grid value minimising the absolute difference is returned with
    ``crossed=False``.
    """
    grid = np.asarray(grid, dtype=float)
    diff = np.asarray(error_norm, dtype=float) - np.asarray(rank_norm, dtype=float)
    for i in range(grid.size):
        if diff[i] == 0:
            return float(grid[i]), True
        if i + 1 < grid.size and diff[i] * diff[i + 1] < 0:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(grid[i] + t * (grid[i + 1] - grid[i])), True
    return float(grid[int(np.argmin(np.abs(diff)))]), False


@dataclass(frozen=True)
class TradeoffCurves:
    grid: np.ndarray
    error: np.ndarray
    rank_comp: np.ndarray
    error_norm: np.ndarray
    rank_comp_norm: np.ndarray
    theta: float
    crossed: bool
    fold_failures: int = 0

    def to_records(self) -> list:
        return [
            {"theta": float(t), "error": float(e), "rank_comp": float(r),
             "error_norm": float(en), "rank_comp_norm": float(rn)}
            for t, e, r, en, rn in zip(self.grid, self.error, self.rank_comp,
                                        self.error_norm, self.rank_comp_norm)
        ]


def equal_tradeoff_theta(data: LabeledDataset, grid, cv: Optional[CvConfig], reference,
                         config: Optional[FlameConfig] = None, workers: int = 1):
    """Equal-trade-off theta on ``grid``; returns ``(theta, TradeoffCurves)``.

    The error curve is the stratified k-fold CV estimate of the mean
    within-class error; the RankComp curve compares full-data fits with
    ``reference`` (a LinearModel or a direction vector).  ``C`` is resolved
    once on the full data and held fixed across grid points and folds.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise InvalidArgument("grid needs at least 3 values")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise InvalidArgument("grid must be strictly increasing within [0, 1]")
    ref = reference.direction if isinstance(reference, LinearModel) else np.asarray(reference, float)
    if ref.shape != (data.d,) or not np.any(ref != 0):
        raise InvalidArgument("reference direction must be non-zero with d entries")
    cv = cv or CvConfig()
    base = (config or FlameConfig()).resolve(data)
    configs = [base.with_(theta=float(t)) for t in grid]

    folds = run_folds(data, configs, cv, workers=workers)
    error = np.empty(grid.size)
    failures = 0
    for j, t in enumerate(grid):
        vals, failed = cv_error(r.to_dict() for r in folds if r.theta == t)
        failures += failed
        if not vals:
            raise SolverFailure(f"every CV fit failed at theta={t:g}")
        error[j] = np.mean(vals)

    def full_fit(cfg):
        model, _ = fit(data, cfg)
        return rank_comp(model.direction, ref)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rc = np.array(list(pool.map(full_fit, configs)))
    else:
        rc = np.array([full_fit(c) for c in configs])

    en, rn = normalize_curve(error), normalize_curve(rc)
    theta, crossed = select_crossing(grid, en, rn)
    curves = TradeoffCurves(grid, error, rc, en, rn, theta, crossed, failures)
    return theta, curves
