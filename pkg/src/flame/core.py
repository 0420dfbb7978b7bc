"""Domain types and the closed-form FLAME loss family.

The three losses share a single scale parameter ``C``:

* the DWD loss ``V(u)`` is linear (slope ``-C``) up to ``u = 1/sqrt(C)`` and
  reciprocal beyond it, so it never reaches zero;
* the modified hinge ``H*(u)`` is ``V`` soft-thresholded at ``sqrt(C)``;
* the FLAME loss ``L(u) = [V(u) - theta*sqrt(C)]_+`` interpolates between the
  two, giving DWD at ``theta = 0`` and the modified hinge at ``theta = 1``.

All loss functions accept scalars or arrays and return the same shape.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "FlameError",
    "InvalidArgument",
    "DataError",
    "SolverFailure",
    "Formulation",
    "FlameConfig",
    "LabeledDataset",
    "LinearModel",
    "FunctionalMargins",
    "dwd_loss",
    "modified_hinge",
    "flame_loss",
    "flame_subgradient",
    "zero_branch_start",
    "default_C",
]


class FlameError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(FlameError, ValueError):
    """A parameter or input violates a documented precondition."""


class DataError(FlameError, ValueError):
    """Input data is malformed (bad file, bad labels, non-finite values...)."""


class SolverFailure(FlameError, RuntimeError):
    """A solver broke down numerically. ``diagnostics`` holds what is known."""

    def __init__(self, message: str, diagnostics=None, partial=None):
        super().__init__(message)
        self.diagnostics = diagnostics
        self.partial = partial


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


class Formulation(str, enum.Enum):
    """Which optimisation problem a fit solves.

    ``NORM_BALL`` minimises the summed loss subject to ``||w|| <= 1`` (solved
    as a second-order cone program). ``PENALIZED`` minimises the mean loss
    plus ``(lambda/2)||w||^2`` (solved by projected subgradient descent).
    """

    NORM_BALL = "norm_ball"
    PENALIZED = "penalized"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        aliases = {"normball": "norm_ball", "socp": "norm_ball", "ball": "norm_ball"}
        text = aliases.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise InvalidArgument(f"unknown formulation {value!r}") from None


_DEFAULT_TOL = {Formulation.NORM_BALL: 1e-8, Formulation.PENALIZED: 1e-5}
_DEFAULT_MAX_ITER = {Formulation.NORM_BALL: 100, Formulation.PENALIZED: 100_000}


@dataclass(frozen=True)
class FlameConfig:
    """Loss and solver parameters for a single FLAME fit.

    ``C=None`` means "derive C from the training data" via :func:`default_C`;
    the fitted model stores the resolved value.  ``tol`` and ``max_iter``
    default per formulation (1e-8 / 100 interior-point iterations for the cone
    program, 1e-5 / 1e5 iterations for the subgradient solver).
    """

    C: Optional[float] = None
    theta: float = 0.0
    lam: float = 1.0
    formulation: Formulation = Formulation.NORM_BALL
    tol: Optional[float] = None
    max_iter: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation.parse(self.formulation))
        if self.C is not None:
            c = float(self.C)
            if not (math.isfinite(c) and c > 0):
                raise InvalidArgument(f"C must be a positive finite number, got {self.C!r}")
            object.__setattr__(self, "C", c)
        theta = float(self.theta)
        if not (0.0 <= theta <= 1.0):
            raise InvalidArgument(f"theta must lie in [0, 1], got {self.theta!r}")
        object.__setattr__(self, "theta", theta)
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidArgument(f"lambda must be positive, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        if self.tol is not None:
            tol = float(self.tol)
            if not (math.isfinite(tol) and tol > 0):
                raise InvalidArgument(f"tolerance must be positive, got {self.tol!r}")
            object.__setattr__(self, "tol", tol)
        if self.max_iter is not None:
            if int(self.max_iter) != self.max_iter or int(self.max_iter) < 1:
                raise InvalidArgument(f"max_iter must be a positive integer, got {self.max_iter!r}")
            object.__setattr__(self, "max_iter", int(self.max_iter))

    @property
    def resolved_tol(self) -> float:
        return self.tol if self.tol is not None else _DEFAULT_TOL[self.formulation]

    @property
    def resolved_max_iter(self) -> int:
        return self.max_iter if self.max_iter is not None else _DEFAULT_MAX_ITER[self.formulation]

    def with_(self, **changes) -> "FlameConfig":
        """Return a copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    def resolve(self, data: "LabeledDataset") -> "FlameConfig":
        """Fill in ``C`` from the data if it was left unset."""
        if self.C is not None:
            return self
        return replace(self, C=default_C(data))

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "theta": self.theta,
            "lam": self.lam,
            "formulation": self.formulation.value,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FlameConfig":
        known = {"C", "theta", "lam", "formulation", "tol", "max_iter"}
        extra = set(payload) - known - {"lambda"}
        if extra:
            raise InvalidArgument(f"unknown config keys: {sorted(extra)}")
        kwargs = {k: payload[k] for k in known if k in payload}
        if "lambda" in payload:
            kwargs["lam"] = payload["lambda"]
        return cls(**kwargs)


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """``n`` samples in ``R^d`` with labels in ``{+1, -1}``.

    Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {X.shape}")
        y_raw = np.asarray(self.labels)
        if y_raw.ndim != 1 or y_raw.shape[0] != X.shape[0]:
            raise DataError(
                f"labels must be a vector of length {X.shape[0]}, got shape {y_raw.shape}"
            )
        if X.shape[0] < 2:
            raise DataError(f"need at least 2 samples, got {X.shape[0]}")
        if X.shape[1] < 1:
            raise DataError("need at least one feature")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature value at row {bad[0]}, column {bad[1]}")
        try:
            yf = y_raw.astype(float)
        except (TypeError, ValueError):
            raise DataError("labels must be numeric +1/-1") from None
        if not np.all((yf == 1.0) | (yf == -1.0)):
            bad = sorted(set(np.unique(yf[(yf != 1.0) & (yf != -1.0)]).tolist()))
            raise DataError(f"labels must be +1 or -1, found {bad[:5]}")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != X.shape[1]:
                raise DataError(
                    f"{len(names)} feature names given for {X.shape[1]} features"
                )
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(yf.astype(np.int64)))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == -1))

    @property
    def imbalance(self) -> float:
        """Imbalance factor ``m = n_- / n_+`` (negative class over positive)."""
        if self.n_pos == 0:
            return math.inf
        return self.n_neg / self.n_pos

    def require_both_classes(self) -> None:
        if self.n_pos == 0 or self.n_neg == 0:
            raise DataError(
                f"both classes are required (n+={self.n_pos}, n-={self.n_neg})"
            )

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(self.features[index], self.labels[index], self.feature_names)

    def select_features(self, columns) -> "LabeledDataset":
        columns = np.asarray(columns, dtype=int)
        names = None
        if self.feature_names is not None:
            names = tuple(self.feature_names[j] for j in columns)
        return LabeledDataset(self.features[:, columns], self.labels, names)

    def flipped(self) -> "LabeledDataset":
        """Same samples with every label negated."""
        return LabeledDataset(self.features, -self.labels, self.feature_names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.feature_names == other.feature_names
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LinearModel:
    """A linear rule ``f(x) = x'w + beta``; classify by ``sign(f)``, sign(0)=+1."""

    direction: np.ndarray
    intercept: float
    config: Optional[FlameConfig] = None

    def __post_init__(self):
        w = np.array(self.direction, dtype=float, copy=True).reshape(-1)
        b = float(self.intercept)
        if not (np.all(np.isfinite(w)) and math.isfinite(b)):
            raise InvalidArgument("model direction and intercept must be finite")
        object.__setattr__(self, "direction", _frozen(w))
        object.__setattr__(self, "intercept", b)

    @property
    def d(self) -> int:
        return self.direction.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise InvalidArgument(f"expected {self.d} features, got {X.shape[1]}")
        return X @ self.direction + self.intercept

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def normalized(self) -> "LinearModel":
        """Rescale so that ``||w|| = 1`` (the classification rule is unchanged)."""
        norm = float(np.linalg.norm(self.direction))
        if norm == 0:
            raise InvalidArgument("cannot normalise a zero direction")
        return LinearModel(self.direction / norm, self.intercept / norm, self.config)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearModel):
            return NotImplemented
        return (
            np.array_equal(self.direction, other.direction)
            and self.intercept == other.intercept
            and self.config == other.config
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FunctionalMargins:
    """Functional margins ``u_i = y_i (x_i'w + beta)`` together with the labels."""

    values: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        y = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if v.shape != y.shape:
            raise InvalidArgument("margins and labels must have equal length")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("functional margins must be finite")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "labels", _frozen(y))

    def __len__(self) -> int:
        return self.values.shape[0]

    def of_class(self, label: int) -> np.ndarray:
        return self.values[self.labels == label]

    @property
    def majority(self) -> np.ndarray:
        """Margins of the negative (majority) class, ``g_j`` in Algorithm 1 terms."""
        return self.of_class(-1)

    def order_statistic(self, l: int, label: int = -1) -> float:
        """The ``l``-th smallest margin (1-based) within one class."""
        vals = np.sort(self.of_class(label))
        if not 1 <= l <= vals.shape[0]:
            raise InvalidArgument(f"order statistic {l} out of range 1..{vals.shape[0]}")
        return float(vals[l - 1])


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------


def _check_C(C) -> float:
    try:
        c = float(C)
    except (TypeError, ValueError):
        raise InvalidArgument(f"C must be a real number, got {C!r}") from None
    if not (math.isfinite(c) and c > 0):
        raise InvalidArgument(f"C must be positive and finite, got {C!r}")
    return c


def _check_theta(theta) -> float:
    try:
        t = float(theta)
    except (TypeError, ValueError):
        raise InvalidArgument(f"theta must be a real number, got {theta!r}") from None
    if not (0.0 <= t <= 1.0):
        raise InvalidArgument(f"theta must lie in [0, 1], got {theta!r}")
    return t


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("margin values must be finite")
    return arr


def _out(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def zero_branch_start(C: float, theta: float) -> float:
    """Margin ``1/(theta sqrt C)`` beyond which the FLAME loss is zero (inf at theta=0)."""
    C = _check_C(C)
    theta = _check_theta(theta)
    if theta == 0.0:
        return math.inf
    return 1.0 / (theta * math.sqrt(C))


def dwd_loss(u, C):
    """DWD loss: ``2 sqrt(C) - C u`` for ``u <= 1/sqrt(C)``, else ``1/u``."""
    C = _check_C(C)
    arr = _check_u(u)
    rc = math.sqrt(C)
    knee = 1.0 / rc
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(arr <= knee, 2.0 * rc - C * arr, 1.0 / arr)
    return _out(val, u)


def modified_hinge(u, C):
    """Modified hinge ``H*(u)``: ``sqrt(C) - C u`` for ``u <= 1/sqrt(C)``, else 0."""
    C = _check_C(C)
    arr = _check_u(u)
    rc = math.sqrt(C)
    val = np.where(arr <= 1.0 / rc, rc - C * arr, 0.0)
    return _out(val, u)


def flame_loss(u, C, theta):
    """FLAME loss ``L(u) = [V(u) - theta sqrt(C)]_+`` written branch by branch."""
    C = _check_C(C)
    theta = _check_theta(theta)
    arr = _check_u(u)
    rc = math.sqrt(C)
    knee = 1.0 / rc
    with np.errstate(divide="ignore", invalid="ignore"):
        linear = (2.0 - theta) * rc - C * arr
        recip = 1.0 / arr - theta * rc
    val = np.where(arr <= knee, linear, recip)
    if theta > 0:
        val = np.where(arr >= 1.0 / (theta * rc), 0.0, val)
    # rounding can leave a -1e-17 residue just below the zero branch
    val = np.maximum(val, 0.0)
    return _out(val, u)


def flame_subgradient(u, C, theta):
    """Right-hand derivative of the FLAME loss, a valid subgradient everywhere."""
    C = _check_C(C)
    theta = _check_theta(theta)
    arr = _check_u(u)
    rc = math.sqrt(C)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(arr < 1.0 / rc, -C, -1.0 / (arr * arr))
    if theta > 0:
        val = np.where(arr >= 1.0 / (theta * rc), 0.0, val)
    return _out(val, u)


def default_C(data: LabeledDataset) -> float:
    """Data-driven scale for ``C``: ``100 / t^2`` with ``t`` the median
    Euclidean distance between samples of opposite classes.

    This is a heuristic in the spirit of the usual DWD default; it is not a
    constant prescribed by the method itself, and any explicit ``C`` overrides it.
    """
    data.require_both_classes()
    pos = data.features[data.labels == 1]
    neg = data.features[data.labels == -1]
    dist = cdist(pos, neg)
    t = float(np.median(dist))
    if not (t > 0 and math.isfinite(t)):
        raise DataError("cannot derive C: the two classes have zero median separation")
    return 100.0 / (t * t)
