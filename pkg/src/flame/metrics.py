"""Performance measures for linear classifiers under a known Bayes rule.

Five measures are provided: mean within-class error, intercept deviation,
angle to a reference direction, rank disagreement of absolute coefficients
(RankComp) and the dispersion of replicate directions.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import InvalidArgument, LinearModel

__all__ = [
    "MetricRecord",
    "DispersionInput",
    "DispersionResult",
    "mean_within_class_error",
    "rank_comp",
    "dispersion",
    "dispersion_report",
    "angle_between",
    "intercept_deviation",
    "evaluate_model",
]


@dataclass(frozen=True)
class MetricRecord:
    """Per-fit measures against a reference (Bayes) rule."""

    mwe: float
    intercept_deviation: float
    angle: float
    rank_comp: float

    def __post_init__(self):
        vals = (self.mwe, self.intercept_deviation, self.angle, self.rank_comp)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgument(f"non-finite metric in {self}")
        if not 0.0 <= self.mwe <= 1.0 or not 0.0 <= self.rank_comp <= 1.0:
            raise InvalidArgument(f"mwe and rank_comp must lie in [0, 1]: {self}")
        if self.intercept_deviation < 0 or not 0.0 <= self.angle <= 180.0:
            raise InvalidArgument(f"metric out of range: {self}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DispersionInput:
    """Direction vectors from ``R >= 2`` replicate fits, shape (R, d)."""

    directions: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.directions, dtype=float)
        if arr.ndim != 2:
            raise InvalidArgument("directions must be a list of equal-length vectors")
        if arr.shape[0] < 2:
            raise InvalidArgument("dispersion needs at least two replicate directions")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("directions contain non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "directions", arr)

    @property
    def R(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class DispersionResult:
    """Sign-aligned dispersion (the reported value) plus the raw one."""

    aligned: float
    raw: float


def _pm1(v, name: str) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise InvalidArgument(f"{name} must be a vector")
    if not np.all(np.isin(arr, (-1, 1))):
        raise InvalidArgument(f"{name} must contain only +1 and -1")
    return arr.astype(int)


def mean_within_class_error(predictions, labels) -> float:
    """Average of the error rates on class +1 and on class -1."""
    pred = _pm1(predictions, "predictions")
    lab = _pm1(labels, "labels")
    if pred.shape != lab.shape:
        raise InvalidArgument(f"length mismatch: {pred.size} predictions, {lab.size} labels")
    pos, neg = lab == 1, lab == -1
    if not pos.any() or not neg.any():
        raise InvalidArgument("both classes must be present in labels")
    err_pos = float(np.mean(pred[pos] != 1))
    err_neg = float(np.mean(pred[neg] != -1))
    return 0.5 * err_pos + 0.5 * err_neg


def _vec(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgument(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} has non-finite entries")
    return arr


def rank_comp(w, w_ref) -> float:
    """Fraction of variable pairs whose |coefficient| order strictly disagrees."""
    a, b = np.abs(_vec(w, "w")), np.abs(_vec(w_ref, "w_ref"))
    if a.shape != b.shape:
        raise InvalidArgument(f"dimension mismatch: {a.size} vs {b.size}")
    d = a.size
    if d < 2:
        raise InvalidArgument("rank_comp needs d >= 2")
    iu = np.triu_indices(d, k=1)
    da = a[:, None] - a[None, :]
    db = b[:, None] - b[None, :]
    discordant = (da[iu] * db[iu]) < 0
    return float(np.count_nonzero(discordant)) / (d * (d - 1) / 2)


def _unit_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0):
        raise InvalidArgument("zero direction vector cannot be normalised")
    return arr / norms[:, None]


def _trace_cov(arr: np.ndarray) -> float:
    centred = arr - arr.mean(axis=0)
    return float(np.sum(centred ** 2) / (arr.shape[0] - 1))


def dispersion_report(inp: DispersionInput) -> DispersionResult:
    """Trace of the sample covariance of unit directions, aligned and raw.

    Alignment flips each direction so its inner product with the first
    replicate is nonnegative; without it a single sign flip inflates the
    statistic.  The aligned value is the one reported by :func:`dispersion`.
    """
    unit = _unit_rows(inp.directions)
    signs = np.where(unit @ unit[0] < 0, -1.0, 1.0)
    return DispersionResult(aligned=_trace_cov(unit * signs[:, None]), raw=_trace_cov(unit))


def dispersion(inp) -> float:
    """Sign-aligned dispersion of replicate directions (denominator R - 1)."""
    if not isinstance(inp, DispersionInput):
        inp = DispersionInput(np.asarray(inp, dtype=float))
    return dispersion_report(inp).aligned


def angle_between(w, w_ref) -> float:
    """Angle in degrees between two non-zero vectors, in [0, 180]."""
    a, b = _vec(w, "w"), _vec(w_ref, "w_ref")
    if a.shape != b.shape:
        raise InvalidArgument(f"dimension mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidArgument("angle undefined for a zero vector")
    cos = float(np.clip((a / na) @ (b / nb), -1.0, 1.0))
    return math.degrees(math.acos(cos))


def intercept_deviation(beta: float, beta_ref: float) -> float:
    """``|beta - beta_ref|``."""
    beta, beta_ref = float(beta), float(beta_ref)
    if not (math.isfinite(beta) and math.isfinite(beta_ref)):
        raise InvalidArgument("intercepts must be finite")
    return abs(beta - beta_ref)


def evaluate_model(model: LinearModel, reference: LinearModel, X_test, y_test) -> MetricRecord:
    """All per-fit measures of ``model`` against ``reference`` on a test set.

    Fitted and Bayes directions live on different scales (a norm-ball fit
    has ``||w|| <= 1``, the Bayes direction does not), so the intercepts are
    compared after scaling both rules to unit direction, i.e. as signed
    offsets of the hyperplanes from the origin.  A fit that returns ``w = 0``
    has no direction; its angle is reported as 90 degrees and its raw
    intercept is used.
    """
    pred = model.predict(X_test)
    mwe = mean_within_class_error(pred, y_test)
    ref = reference.normalized()
    if np.linalg.norm(model.direction) == 0:
        angle, beta = 90.0, model.intercept
    else:
        angle = angle_between(model.direction, reference.direction)
        beta = model.normalized().intercept
    rc = rank_comp(model.direction, reference.direction) if model.d >= 2 else 0.0
    return MetricRecord(
        mwe=mwe,
        intercept_deviation=intercept_deviation(beta, ref.intercept),
        angle=angle,
        rank_comp=rc,
    )
