"""Stratified k-fold cross-validation of the mean within-class error."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FlameConfig, InvalidArgument, LabeledDataset, SolverFailure
from .solver import fit

__all__ = ["CvConfig", "FoldResult", "cv_error", "stratified_folds", "cross_validated_mwe", "run_folds"]


@dataclass(frozen=True)
class CvConfig:
    """``folds``-fold CV repeated over ``splits`` random partitions."""

    folds: int = 5
    splits: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.folds) != self.folds or self.folds < 2:
            raise InvalidArgument(f"folds must be an integer >= 2, got {self.folds}")
        if int(self.splits) != self.splits or self.splits < 1:
            raise InvalidArgument(f"splits must be an integer >= 1, got {self.splits}")

    def to_dict(self) -> dict:
        return {"folds": self.folds, "splits": self.splits, "seed": self.seed}


@dataclass(frozen=True)
class FoldResult:
    """Held-out error counts of one fit; ``error`` is set when the fit failed."""

    split: int
    fold: int
    theta: float
    err_pos: int = 0
    n_pos: int = 0
    err_neg: int = 0
    n_neg: int = 0
    error: str = ""

    @property
    def mwe(self) -> Optional[float]:
        """Per-fold MWE, or None when the fit failed or a class is absent."""
        return _fold_mwe(self.to_dict())

    def to_dict(self) -> dict:
        return {"theta": self.theta, "split": self.split, "fold": self.fold,
                "err_pos": self.err_pos, "n_pos": self.n_pos, "err_neg": self.err_neg,
                "n_neg": self.n_neg, "mwe": None if self.error else _counts_mwe(
                    self.err_pos, self.n_pos, self.err_neg, self.n_neg),
                "error": self.error or None}


def _counts_mwe(err_pos, n_pos, err_neg, n_neg) -> Optional[float]:
    if n_pos == 0 or n_neg == 0:
        return None
    return 0.5 * err_pos / n_pos + 0.5 * err_neg / n_neg


def _fold_mwe(row: dict) -> Optional[float]:
    if row.get("error"):
        return None
    return _counts_mwe(row["err_pos"], row["n_pos"], row["err_neg"], row["n_neg"])


def cv_error(rows) -> tuple:
    """``(values, n_failed)`` for the fold records of one theta.

    ``values`` are per-fold MWEs when every successful fold holds both
    classes.  Otherwise (leave-one-out, tiny classes) the held-out counts are
    pooled within each split and one MWE per split is returned.  Rows are
    dicts as produced by :meth:`FoldResult.to_dict`.
    """
    rows = list(rows)
    ok = [r for r in rows if not r.get("error")]
    failed = len(rows) - len(ok)
    per_fold = [_fold_mwe(r) for r in ok]
    if all(v is not None for v in per_fold):
        return per_fold, failed
    pooled: dict = {}
    for r in ok:
        acc = pooled.setdefault(r["split"], [0, 0, 0, 0])
        for i, key in enumerate(("err_pos", "n_pos", "err_neg", "n_neg")):
            acc[i] += r[key]
    values = [_counts_mwe(*acc) for _, acc in sorted(pooled.items())]
    return [v for v in values if v is not None], failed


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold index (0..k-1) for every sample, preserving the class ratio.

    Each class is shuffled with its own draw from one seeded generator and
    dealt round-robin into the folds.  ``k == n`` is leave-one-out: every
    sample is its own fold and no stratification is attempted.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise InvalidArgument("k must be >= 2")
    rng = np.random.default_rng(seed)
    if k == labels.shape[0]:
        return rng.permutation(k)
    fold = np.empty(labels.shape[0], dtype=int)
    for label in (1, -1):
        idx = np.flatnonzero(labels == label)
        if idx.size < k:
            raise InvalidArgument(
                f"cannot stratify: class {label:+d} has {idx.size} samples for {k} folds"
            )
        perm = rng.permutation(idx)
        fold[perm] = np.arange(perm.size) % k
    return fold


def _split_seed(seed: int, split: int) -> int:
    return int(np.random.SeedSequence([seed, split]).generate_state(1)[0])


def run_folds(data: LabeledDataset, configs, cv: CvConfig, workers: int = 1) -> list:
    """Fit every config on every training fold; returns a list of FoldResult.

    ``configs`` is a sequence of resolved FlameConfig objects.  A fit that
    raises is recorded with its error message.
    """
    data.require_both_classes()
    X, y = data.features, data.labels
    jobs = []
    for split in range(cv.splits):
        fold = stratified_folds(data.labels, cv.folds, _split_seed(cv.seed, split))
        for f in range(cv.folds):
            train = data.subset(np.flatnonzero(fold != f))
            test = np.flatnonzero(fold == f)
            for cfg in configs:
                jobs.append((split, f, cfg, train, test))

    def one(job):
        split, f, cfg, train, test = job
        try:
            model, _ = fit(train, cfg)
        except Exception as exc:  # recorded, the sweep continues
            return FoldResult(split, f, cfg.theta, error=f"{type(exc).__name__}: {exc}")
        pred = model.predict(X[test])
        pos, neg = y[test] == 1, y[test] == -1
        return FoldResult(split, f, cfg.theta, int(np.sum(pred[pos] != 1)), int(pos.sum()),
                          int(np.sum(pred[neg] != -1)), int(neg.sum()))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(job) for job in jobs]


def cross_validated_mwe(data: LabeledDataset, config: FlameConfig, cv: CvConfig) -> float:
    """Mean held-out MWE of ``config`` over all splits and folds."""
    results = run_folds(data, [config], cv)
    vals, _ = cv_error(r.to_dict() for r in results)
    if not vals:
        raise SolverFailure(f"every fold fit failed: {results[0].error}")
    return float(np.mean(vals))
