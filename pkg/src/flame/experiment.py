"""Experiment configuration, sweeps and reports.

A sweep runs every combination of theta grid value, dimension ``d``,
imbalance factor ``m`` and replicate.  Each replicate draws a training set
and an independent test set from the simulation design, fits FLAME at every
theta on the same training set, and scores each fit against the Bayes rule.
Records keep the fitted direction so the per-cell aggregates (means,
standard errors, dispersion) can be recomputed from the records alone.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import FlameConfig, InvalidArgument, LabeledDataset, SolverFailure
from .crossval import CvConfig, cv_error, run_folds
from .dataio import atomic_write_text, load_csv, variance_ratio_filter
from .metrics import DispersionInput, dispersion_report, evaluate_model
from .simgen import (
    CovarianceKind,
    TwoClassGaussianSpec,
    block_comparison_spec,
    covariance_structure_spec,
    direction_stability_spec,
    increasing_dimension_spec,
    one_dim_imbalance_spec,
    sample_two_class,
    spec_bayes_rule,
)
from .solver import fit

__all__ = [
    "REPORT_FORMAT_VERSION",
    "DEFAULT_THETA_GRID",
    "Mode",
    "DataSource",
    "SimulationDesign",
    "DESIGNS",
    "ExperimentConfig",
    "ExperimentReport",
    "aggregate_sweep",
    "aggregate_cv",
    "cross_validate",
    "run_sweep",
    "run_experiment",
    "report_text",
    "write_report",
    "read_report",
]

REPORT_FORMAT_VERSION = 1
DEFAULT_THETA_GRID = tuple(round(0.1 * i, 1) for i in range(11))
METRICS = ("mwe", "intercept_deviation", "angle", "rank_comp")


class Mode(str, enum.Enum):
    FIT = "fit"
    TUNE = "tune"
    SIMULATE = "simulate"
    VERIFY = "verify"
    CROSS_VALIDATE = "cv"


# --------------------------------------------------------------------------
# data sources
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class DataSource:
    """A CSV file, optionally reduced to the ``keep`` highest-ratio features."""

    path: str
    label_column: str = "label"
    positive_label: Optional[str] = None
    keep: Optional[int] = None

    def load(self) -> LabeledDataset:
        data = load_csv(self.path, self.label_column, self.positive_label)
        if self.keep is not None:
            data = variance_ratio_filter(data, self.keep)
        return data

    def to_dict(self) -> dict:
        return {"path": self.path, "label_column": self.label_column,
                "positive_label": self.positive_label, "keep": self.keep}

    @classmethod
    def from_dict(cls, payload: dict) -> "DataSource":
        return cls(**_only(payload, {"path", "label_column", "positive_label", "keep"}, "data"))


def _only(payload: dict, allowed: set, where: str) -> dict:
    extra = set(payload) - allowed
    if extra:
        raise InvalidArgument(f"unknown {where} keys: {sorted(extra)}")
    return dict(payload)


def _stability(d, m, seed, n_per_class=120, shift=3.0):
    spec = direction_stability_spec(seed, d=d, n_per_class=n_per_class, shift=shift)
    return spec if m == 1 else spec.with_(n_minus=int(round(m * spec.n_plus)))


def _one_dim(d, m, seed, n_plus=100, mean=2.0):
    if d != 1:
        raise InvalidArgument("the one_dim_imbalance design has d=1")
    return one_dim_imbalance_spec(int(m), seed, n_plus=n_plus, mean=mean)


def _increasing(d, m, seed, n_total=240, norm=2.7):
    return increasing_dimension_spec(d, m, seed, n_total=n_total, norm=norm)


def _covariance(d, m, seed, kind="interchangeable", n_total=240, rho=0.8, distance=5.4):
    return covariance_structure_spec(CovarianceKind(kind), m, seed, d=d, n_total=n_total, rho=rho,
                                     distance=distance)


def _blocks(d, m, seed, n_total=240, rho=0.8, distance=5.4):
    return block_comparison_spec(d, seed, m=m, n_total=n_total, rho=rho, distance=distance)


# name -> (builder(d, m, seed, **params), default d)
DESIGNS: dict = {
    "direction_stability": (_stability, 12),
    "one_dim_imbalance": (_one_dim, 1),
    "increasing_dimension": (_increasing, 100),
    "covariance": (_covariance, 300),
    "block_comparison": (_blocks, 300),
}


@dataclass(frozen=True)
class SimulationDesign:
    """A named simulation design with parameters, or one fixed Gaussian spec.

    Named designs build a :class:`TwoClassGaussianSpec` for every
    ``(d, m, seed)``.  A fixed ``spec`` ignores ``d`` and ``m`` (they must
    match the spec) and only reseeds.
    """

    name: str = "covariance"
    params: dict = field(default_factory=dict)
    spec: Optional[TwoClassGaussianSpec] = None

    def __post_init__(self):
        if self.spec is None and self.name not in DESIGNS:
            raise InvalidArgument(f"unknown design {self.name!r}; choose from {sorted(DESIGNS)}")

    @property
    def default_d(self) -> int:
        return self.spec.d if self.spec is not None else DESIGNS[self.name][1]

    @property
    def default_m(self) -> float:
        return self.spec.imbalance if self.spec is not None else 1.0

    def build(self, d: int, m: float, seed: int) -> TwoClassGaussianSpec:
        if self.spec is not None:
            if d != self.spec.d or not math.isclose(m, self.spec.imbalance):
                raise InvalidArgument("a fixed spec cannot be swept over d or m")
            return self.spec.with_(seed=seed)
        builder = DESIGNS[self.name][0]
        try:
            return builder(d, m, seed, **self.params)
        except TypeError as exc:
            raise InvalidArgument(f"bad parameters for design {self.name!r}: {exc}") from None

    def to_dict(self) -> dict:
        if self.spec is not None:
            return {"spec": self.spec.to_dict()}
        return {"name": self.name, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, payload: dict) -> "SimulationDesign":
        payload = _only(payload, {"name", "params", "spec"}, "simulation")
        if "spec" in payload:
            return cls(name="spec", spec=TwoClassGaussianSpec.from_dict(payload["spec"]))
        return cls(name=payload.get("name", "covariance"), params=dict(payload.get("params", {})))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI invocation needs.

    ``data`` and ``simulation`` are the two dataset sources; the modes that
    need data take exactly one of them.  ``test_size`` is the per-class size
    of the independent test set drawn for each simulated replicate.
    """

    mode: Mode = Mode.SIMULATE
    data: Optional[DataSource] = None
    simulation: Optional[SimulationDesign] = None
    flame: FlameConfig = field(default_factory=FlameConfig)
    theta_grid: tuple = DEFAULT_THETA_GRID
    dims: tuple = ()
    ms: tuple = (1.0,)
    replicates: int = 1
    folds: int = 5
    splits: int = 1
    test_size: int = 500
    seed: int = 0
    output: Optional[str] = None
    format: str = "json"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        grid = tuple(float(t) for t in self.theta_grid)
        if not grid or any(not 0.0 <= t <= 1.0 for t in grid):
            raise InvalidArgument("theta grid values must lie in [0, 1]")
        object.__setattr__(self, "theta_grid", grid)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "ms", tuple(float(m) for m in self.ms))
        if any(d < 1 for d in self.dims) or any(m < 1 for m in self.ms):
            raise InvalidArgument("dimensions must be >= 1 and imbalance factors >= 1")
        if int(self.replicates) < 1:
            raise InvalidArgument("replicates must be >= 1")
        if self.mode is Mode.CROSS_VALIDATE and int(self.folds) < 2:
            raise InvalidArgument("cross-validation needs folds >= 2")
        if int(self.splits) < 1 or int(self.test_size) < 1 or int(self.workers) < 1:
            raise InvalidArgument("splits, test_size and workers must be >= 1")
        if self.format not in ("json", "csv"):
            raise InvalidArgument(f"format must be json or csv, got {self.format!r}")
        if self.data is not None and self.simulation is not None:
            raise InvalidArgument("give either a CSV data source or a simulation design, not both")
        if self.mode is Mode.SIMULATE and self.simulation is None:
            raise InvalidArgument("simulate mode needs a simulation design")
        if self.mode in (Mode.FIT, Mode.TUNE, Mode.CROSS_VALIDATE) and self.data is None \
                and self.simulation is None:
            raise InvalidArgument(f"{self.mode.value} mode needs a dataset source")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def load_dataset(self) -> LabeledDataset:
        """The single dataset of fit/tune/cv modes (a simulated draw uses ``seed``)."""
        if self.data is not None:
            return self.data.load()
        if self.simulation is None:
            raise InvalidArgument("no dataset source configured")
        d = self.dims[0] if self.dims else self.simulation.default_d
        m = self.ms[0] if self.ms else self.simulation.default_m
        spec = self.simulation.build(d, m, self.seed)
        return sample_two_class(spec)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "data": None if self.data is None else self.data.to_dict(),
            "simulation": None if self.simulation is None else self.simulation.to_dict(),
            "flame": self.flame.to_dict(),
            "theta_grid": list(self.theta_grid),
            "dims": list(self.dims),
            "ms": list(self.ms),
            "replicates": self.replicates,
            "folds": self.folds,
            "splits": self.splits,
            "test_size": self.test_size,
            "seed": self.seed,
            "output": self.output,
            "format": self.format,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        allowed = {"mode", "data", "simulation", "flame", "theta_grid", "dims", "ms", "replicates",
                   "folds", "splits", "test_size", "seed", "output", "format", "workers"}
        kw = _only(payload, allowed, "experiment config")
        if kw.get("data") is not None:
            kw["data"] = DataSource.from_dict(kw["data"])
        if kw.get("simulation") is not None:
            kw["simulation"] = SimulationDesign.from_dict(kw["simulation"])
        if kw.get("flame") is not None:
            kw["flame"] = FlameConfig.from_dict(kw["flame"])
        else:
            kw.pop("flame", None)
        for key in ("theta_grid", "dims", "ms"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------
@dataclass
class ExperimentReport:
    """Flat ``records`` plus ``aggregates`` rows; ``config`` is the echo of
    the configuration that produced them (JSON reports only)."""

    kind: str
    records: list
    aggregates: list
    config: Optional[dict] = None
    version: int = REPORT_FORMAT_VERSION

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r.get("error"))

    def to_dict(self) -> dict:
        return {"format_version": self.version, "kind": self.kind, "config": self.config,
                "records": self.records, "aggregates": self.aggregates}

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentReport":
        version = payload.get("format_version")
        if version != REPORT_FORMAT_VERSION:
            raise InvalidArgument(f"unsupported report format version {version!r}")
        return cls(payload["kind"], list(payload["records"]), list(payload["aggregates"]),
                   payload.get("config"), version)


_INT_COLUMNS = {"d", "replicate", "split", "fold", "n_ok", "n_failed", "format_version", "step",
                "err_pos", "n_pos", "err_neg", "n_neg"}
_BOOL_COLUMNS = {"converged", "crossed", "terminated"}
_STR_COLUMNS = {"row_type", "kind", "error"}


def _encode_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _decode_cell(column: str, text: str):
    if text == "":
        return None
    if column in _STR_COLUMNS:
        return text
    if column in _BOOL_COLUMNS:
        return text == "true"
    if column in _INT_COLUMNS:
        return int(text)
    if column == "direction":
        return [float(v) for v in text.split()]
    return float(text)


def _report_to_csv(report: ExperimentReport) -> str:
    rows = [dict(r, row_type="record") for r in report.records]
    rows += [dict(a, row_type="aggregate") for a in report.aggregates]
    columns = ["format_version", "kind", "row_type"]
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        row = dict(row, format_version=report.version, kind=report.kind)
        writer.writerow([_encode_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _report_from_csv(text: str) -> ExperimentReport:
    reader = csv.DictReader(io.StringIO(text))
    records, aggregates, kind, version = [], [], None, None
    for raw in reader:
        row = {k: _decode_cell(k, v) for k, v in raw.items()}
        version, kind = row.pop("format_version"), row.pop("kind")
        row_type = row.pop("row_type")
        target = records if row_type == "record" else aggregates
        target.append(row)
    if version is None:
        raise InvalidArgument("empty report")
    if version != REPORT_FORMAT_VERSION:
        raise InvalidArgument(f"unsupported report format version {version!r}")
    schema = _CSV_SCHEMAS.get(kind)
    if schema is None:
        # free-form rows: an empty cell means the key was absent
        records = [{k: v for k, v in r.items() if v is not None} for r in records]
        aggregates = [{k: v for k, v in a.items() if v is not None} for a in aggregates]
    else:
        records = [{k: r.get(k) for k in schema[0]} for r in records]
        aggregates = [{k: a.get(k) for k in schema[1]} for a in aggregates]
    return ExperimentReport(kind, records, aggregates, None, version)


# (record columns, aggregate columns) of the fixed-schema report kinds
_CSV_SCHEMAS = {
    "sweep": (
        ("theta", "d", "m", "replicate", *METRICS, "converged", "error", "direction"),
        ("theta", "d", "m", "n_ok", "n_failed", *(f"{m}_{s}" for m in METRICS for s in ("mean", "se")),
         "dispersion", "dispersion_raw"),
    ),
    "cv": (
        ("theta", "split", "fold", "err_pos", "n_pos", "err_neg", "n_neg", "mwe", "error"),
        ("theta", "n_ok", "n_failed", "mean", "se"),
    ),
}


def report_text(report: ExperimentReport, fmt: str = "json") -> str:
    """Serialise as ``json`` (nested, with the config echo) or ``csv`` (flat rows)."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=1, allow_nan=False) + "\n"
    if fmt == "csv":
        return _report_to_csv(report)
    raise InvalidArgument(f"unknown report format {fmt!r}")


def write_report(report: ExperimentReport, path, fmt: str = "json") -> None:
    """Write :func:`report_text` atomically (temporary file and rename)."""
    atomic_write_text(path, report_text(report, fmt))


def read_report(path, fmt: Optional[str] = None) -> ExperimentReport:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        return ExperimentReport.from_dict(json.loads(text))
    return _report_from_csv(text)


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------
def _mean_se(values: list) -> tuple:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return mean, se


def aggregate_sweep(records: list) -> list:
    """Per ``(theta, d, m)`` cell: counts, metric means and standard errors,
    and the dispersion of the successful replicate directions."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r["theta"], r["d"], r["m"]), []).append(r)
    out = []
    for (theta, d, m), rows in sorted(cells.items()):
        ok = [r for r in rows if not r.get("error")]
        agg = {"theta": theta, "d": d, "m": m, "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
        for name in METRICS:
            agg[f"{name}_mean"], agg[f"{name}_se"] = _mean_se([r[name] for r in ok])
        if len(ok) >= 2:
            disp = dispersion_report(DispersionInput(np.array([r["direction"] for r in ok])))
            agg["dispersion"], agg["dispersion_raw"] = disp.aligned, disp.raw
        else:
            agg["dispersion"] = agg["dispersion_raw"] = None
        out.append(agg)
    return out


def aggregate_cv(records: list) -> list:
    """Per theta: mean and standard error of the held-out MWE over split x fold
    (over splits when folds are too small to hold both classes)."""
    by_theta: dict = {}
    for r in records:
        by_theta.setdefault(r["theta"], []).append(r)
    out = []
    for theta, rows in sorted(by_theta.items()):
        vals, failed = cv_error(rows)
        mean, se = _mean_se(vals)
        out.append({"theta": theta, "n_ok": len(rows) - failed, "n_failed": failed,
                    "mean": mean, "se": se})
    return out


# --------------------------------------------------------------------------
# runners
# --------------------------------------------------------------------------
def cross_validate(data: LabeledDataset, config: FlameConfig, folds: int = 5, splits: int = 1,
                   seed: int = 0, theta_grid=None, workers: int = 1) -> ExperimentReport:
    """Stratified ``folds``-fold CV repeated over ``splits`` random partitions.

    ``theta_grid=None`` evaluates ``config.theta`` only.  ``C`` is resolved
    once on the full data.  Every split x fold x theta fit is one record.
    """
    cv = CvConfig(folds=folds, splits=splits, seed=seed)
    base = config.resolve(data)
    grid = (base.theta,) if theta_grid is None else tuple(float(t) for t in theta_grid)
    results = run_folds(data, [base.with_(theta=t) for t in grid], cv, workers=workers)
    records = [r.to_dict() for r in sorted(results, key=lambda r: (r.theta, r.split, r.fold))]
    return ExperimentReport("cv", records, aggregate_cv(records))


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _replicate(design: SimulationDesign, flame: FlameConfig, grid: tuple, d: int, m: float,
               rep: int, seed: int, test_size: int) -> list:
    m_key = int(round(m * 1000))
    spec = design.build(d, m, _derived_seed(seed, d, m_key, rep, 0))
    train = sample_two_class(spec)
    test = sample_two_class(spec.with_(n_plus=test_size, n_minus=test_size,
                                       seed=_derived_seed(seed, d, m_key, rep, 1)))
    bayes = spec_bayes_rule(spec)
    cfg = flame.resolve(train)
    rows = []
    for theta in grid:
        row = {"theta": theta, "d": d, "m": m, "replicate": rep}
        try:
            model, diag = fit(train, cfg.with_(theta=theta))
            metrics = evaluate_model(model, bayes, test.features, test.labels)
            row.update(metrics.to_dict())
            row.update({"converged": bool(diag.converged), "error": None,
                        "direction": model.direction.tolist()})
        except Exception as exc:  # recorded per cell; the sweep continues
            row.update({name: None for name in METRICS})
            row.update({"converged": None, "error": f"{type(exc).__name__}: {exc}", "direction": None})
        rows.append(row)
    return rows


def run_sweep(config: ExperimentConfig, progress: Optional[Callable[[int, int], None]] = None
              ) -> ExperimentReport:
    """theta grid x dims x ms x replicates against the Bayes rule."""
    design = config.simulation
    if design is None:
        raise InvalidArgument("a sweep needs a simulation design")
    dims = config.dims or (design.default_d,)
    ms = config.ms or (design.default_m,)
    # build once up front so parameter errors surface before any fitting
    for d in dims:
        for m in ms:
            design.build(d, m, config.seed)
    jobs = [(d, m, r) for d in dims for m in ms for r in range(config.replicates)]

    def one(job):
        d, m, r = job
        return _replicate(design, config.flame, config.theta_grid, d, m, r, config.seed, config.test_size)

    results = []
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for k, rows in enumerate(pool.map(one, jobs)):
                results.extend(rows)
                if progress:
                    progress(k + 1, len(jobs))
    else:
        for k, job in enumerate(jobs):
            results.extend(one(job))
            if progress:
                progress(k + 1, len(jobs))
    records = sorted(results, key=lambda r: (r["d"], r["m"], r["theta"], r["replicate"]))
    report = ExperimentReport("sweep", records, aggregate_sweep(records), config.to_dict())
    if records and all(r["error"] for r in records):
        raise SolverFailure(f"every fit in the sweep failed; first error: {records[0]['error']}",
                            partial=report)
    return report


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run a simulate or cv configuration and write the report if ``output`` is set."""
    if config.mode is Mode.SIMULATE:
        report = run_sweep(config)
    elif config.mode is Mode.CROSS_VALIDATE:
        data = config.load_dataset()
        report = cross_validate(data, config.flame, config.folds, config.splits, config.seed,
                                config.theta_grid, config.workers)
        report.config = config.to_dict()
        if report.records and all(r["error"] for r in report.records):
            raise SolverFailure("every cross-validation fit failed", partial=report)
    else:
        raise InvalidArgument(f"run_experiment handles simulate and cv modes, not {config.mode.value}")
    if config.output:
        write_report(report, config.output, config.format)
    return report
