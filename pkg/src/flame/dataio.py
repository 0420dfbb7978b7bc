"""File input and output: CSV datasets, the gene-style feature filter, model files.

CSV dialect: comma separated, a header row, UTF-8, '.' as the decimal mark.
No dialect sniffing is done.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DataError, FlameConfig, InvalidArgument, LabeledDataset, LinearModel

__all__ = [
    "CsvError",
    "MissingFileError",
    "EmptyDatasetError",
    "MultiClassError",
    "ConstantLabelError",
    "NonNumericError",
    "load_csv",
    "load_features",
    "write_csv",
    "variance_ratio_filter",
    "feature_ratios",
    "MODEL_FORMAT_VERSION",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "atomic_write_text",
]

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


class CsvError(DataError):
    """A CSV file could not be turned into a dataset."""


class MissingFileError(CsvError):
    pass


class EmptyDatasetError(CsvError):
    pass


class MultiClassError(CsvError):
    pass


class ConstantLabelError(CsvError):
    pass


class NonNumericError(CsvError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_csv(path, label_column: str = "label", positive_label: Optional[str] = None) -> LabeledDataset:
    """Read a labelled dataset.

    ``positive_label`` is the label token mapped to +1; the other token maps
    to -1.  When it is omitted the tokens must already be ``1`` and ``-1``
    (``+1`` is accepted too).  Every other column must be numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty (a header row is required)") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise CsvError(f"{path}: label column {label_column!r} not in header {header}")
        li = header.index(label_column)
        names = [h for j, h in enumerate(header) if j != li]
        tokens, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            tokens.append(row[li].strip())
            vals = []
            for j, cell in enumerate(row):
                if j == li:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericError(
                        f"{path}:{lineno}: column {header[j]!r} has non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise NonNumericError(f"{path}:{lineno}: column {header[j]!r} has non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows after the header")
    distinct = sorted(set(tokens))
    if len(distinct) > 2:
        raise MultiClassError(f"{path}: expected two label values, found {len(distinct)}: {distinct}")
    if len(distinct) < 2:
        raise ConstantLabelError(f"{path}: every row has label {distinct[0]!r}; two classes are required")
    if positive_label is None:
        mapping = {"1": 1, "+1": 1, "-1": -1}
        if not all(t in mapping for t in distinct):
            raise CsvError(f"{path}: labels {distinct} are not +-1; pass the positive label token")
        y = np.array([mapping[t] for t in tokens])
    else:
        if positive_label not in distinct:
            raise CsvError(f"{path}: positive label {positive_label!r} not among {distinct}")
        y = np.array([1 if t == positive_label else -1 for t in tokens])
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    if X.shape[1] == 0:
        raise CsvError(f"{path}: no feature columns")
    return LabeledDataset(X, y, tuple(names))


def load_features(path, label_column: Optional[str] = "label") -> tuple:
    """Read a feature table for prediction; returns ``(X, names, label_tokens)``.

    The label column is optional here: when present it is split off and its
    raw tokens are returned, otherwise ``label_tokens`` is None.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyDatasetError(f"{path}: file is empty (a header row is required)")
    header = [h.strip() for h in rows[0]]
    li = header.index(label_column) if label_column in header else None
    names = [h for j, h in enumerate(header) if j != li]
    X, tokens = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
        vals = []
        for j, cell in enumerate(row):
            if j == li:
                tokens.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericError(f"{path}:{lineno}: column {header[j]!r} has non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise NonNumericError(f"{path}:{lineno}: column {header[j]!r} has non-finite value {cell!r}")
            vals.append(v)
        X.append(vals)
    if not X:
        raise EmptyDatasetError(f"{path}: no data rows after the header")
    return np.array(X, dtype=float), tuple(names), (tokens if li is not None else None)


def write_csv(data: LabeledDataset, path, label_column: str = "label") -> None:
    """Write ``data`` in the dialect :func:`load_csv` reads (labels as 1/-1)."""
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.d))
    lines = [",".join(list(names) + [label_column])]
    for row, label in zip(data.features, data.labels):
        lines.append(",".join([repr(float(v)) for v in row] + [str(int(label))]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def feature_ratios(data: LabeledDataset) -> tuple:
    """Per-feature ``(sd/|mean|, sd)`` with the sample sd (denominator n-1).

    A zero mean with a positive sd gives an infinite ratio; a constant zero
    feature gives 0.
    """
    X = data.features
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mean != 0, sd / np.abs(mean), np.where(sd > 0, np.inf, 0.0))
    return ratio, sd


def variance_ratio_filter(data: LabeledDataset, keep: int) -> LabeledDataset:
    """Keep the ``keep`` features with the largest ``sd/|mean|``.

    Zero-mean features with positive sd rank above every finite ratio and
    among themselves by sd (a warning is logged).  Ties keep the original
    column order, and the kept columns stay in their original order.
    """
    if int(keep) != keep or keep < 1:
        raise InvalidArgument(f"keep must be a positive integer, got {keep}")
    if keep > data.d:
        raise InvalidArgument(f"keep={keep} exceeds the number of features d={data.d}")
    ratio, sd = feature_ratios(data)
    inf = np.isinf(ratio)
    if inf.any():
        log.warning("%d feature(s) have zero mean; ranked by sd above all finite ratios", int(inf.sum()))
    # primary key: finite ratio (inf first), secondary: sd for the infinite group
    primary = np.where(inf, np.inf, ratio)
    secondary = np.where(inf, sd, 0.0)
    order = np.lexsort((np.arange(data.d), -secondary, -primary))
    kept = np.sort(order[:keep])
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.d))
    return LabeledDataset(data.features[:, kept], data.labels, tuple(names[j] for j in kept))


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------
def model_to_dict(model: LinearModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "d": model.d,
        "omega": model.direction.tolist(),
        "beta": model.intercept,
        "config": None if model.config is None else model.config.to_dict(),
    }


def model_from_dict(payload: dict) -> LinearModel:
    try:
        version = payload["version"]
        d = int(payload["d"])
        omega = np.asarray(payload["omega"], dtype=float)
        beta = float(payload["beta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from None
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version!r}")
    if omega.ndim != 1 or omega.size != d:
        raise DataError(f"model declares d={d} but omega has {omega.size} entries")
    if not (np.all(np.isfinite(omega)) and math.isfinite(beta)):
        raise DataError("model coefficients must be finite")
    cfg = payload.get("config")
    return LinearModel(omega, beta, FlameConfig.from_dict(cfg) if cfg else None)


def save_model(model: LinearModel, path) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> LinearModel:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(payload)
