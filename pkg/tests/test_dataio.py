from __future__ import annotations

import json
import math

import numpy as np
import pytest

from flame.core import FlameConfig, InvalidArgument, LabeledDataset, LinearModel
from flame.dataio import (
    ConstantLabelError,
    CsvError,
    EmptyDatasetError,
    MissingFileError,
    MultiClassError,
    NonNumericError,
    feature_ratios,
    load_csv,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    variance_ratio_filter,
    write_csv,
)
from flame.core import DataError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------- CSV loading
def test_load_csv_positive_token(tmp_path):
    path = write(tmp_path, "x1,x2,label\n1.0,2.0,a\n3.0,4.5,b\n-1,0,a\n")
    data = load_csv(path, positive_label="a")
    assert list(data.labels) == [1, -1, 1]
    assert data.feature_names == ("x1", "x2")
    assert data.features[1, 1] == 4.5


def test_load_csv_default_pm1(tmp_path):
    path = write(tmp_path, "g,cls\n0.5,+1\n0.25,-1\n")
    data = load_csv(path, label_column="cls")
    assert list(data.labels) == [1, -1]


@pytest.mark.parametrize("text,error,fragment", [
    ("x1,label\n", EmptyDatasetError, "no data rows"),
    ("", EmptyDatasetError, "empty"),
    ("x1,label\n1,a\n2,b\n3,c\n", MultiClassError, "'c'"),
    ("x1,label\n1,a\n2,a\n", ConstantLabelError, "'a'"),
    ("x1,label\n1,a\nfoo,b\n", NonNumericError, ":3: column 'x1'"),
    ("x1,label\n1,a\nnan,b\n", NonNumericError, "non-finite"),
    ("x1,label\n1,a\n2\n", CsvError, "expected 2 fields"),
    ("x1,y\n1,a\n2,b\n", CsvError, "label column"),
])
def test_load_csv_errors(tmp_path, text, error, fragment):
    path = write(tmp_path, text)
    with pytest.raises(error) as info:
        load_csv(path, positive_label="a")
    assert fragment in str(info.value)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_csv(tmp_path / "nope.csv")


def test_csv_roundtrip(tmp_path, small_data):
    path = tmp_path / "out.csv"
    write_csv(small_data, path)
    back = load_csv(path)
    assert np.array_equal(back.features, small_data.features)
    assert np.array_equal(back.labels, small_data.labels)


# ---------------------------------------------------------------- variance-ratio filter
def two_sample_table(pairs):
    """Feature j takes values m - h and m + h, so sd = h sqrt(2) and the
    ratio sd/|mean| is h sqrt(2) / m."""
    X = np.array([[m - h for m, h in pairs], [m + h for m, h in pairs]])
    names = tuple(f"f{j + 1}" for j in range(len(pairs)))
    return LabeledDataset(X, [1, -1], names)


def test_filter_hand_ranked_top3():
    pairs = [(10, 1), (1, 1), (5, 2), (2, 3), (4, 1), (1, 0.6), (3, 6), (8, 4), (6, 0.3), (2, 1.6)]
    data = two_sample_table(pairs)
    hand = [0.1, 1.0, 0.4, 1.5, 0.25, 0.6, 2.0, 0.5, 0.05, 0.8]
    ratio, _ = feature_ratios(data)
    assert ratio == pytest.approx(np.array(hand) * math.sqrt(2))
    kept = variance_ratio_filter(data, 3)
    assert kept.feature_names == ("f2", "f4", "f7")
    assert np.array_equal(kept.features, data.features[:, [1, 3, 6]])
    assert np.array_equal(kept.labels, data.labels)


def test_filter_identity_and_constant_last(small_data):
    same = variance_ratio_filter(small_data, small_data.d)
    assert np.array_equal(same.features, small_data.features)
    data = LabeledDataset([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]], [1, -1, -1], ("const", "var"))
    assert variance_ratio_filter(data, 1).feature_names == ("var",)


def test_filter_zero_mean_ranked_first(caplog):
    data = LabeledDataset([[-1.0, 9.0, -3.0], [1.0, 11.0, 3.0]], [1, -1], ("a", "b", "c"))
    kept = variance_ratio_filter(data, 2)
    assert kept.feature_names == ("a", "c")
    assert "zero mean" in caplog.text


def test_filter_errors(small_data):
    with pytest.raises(InvalidArgument):
        variance_ratio_filter(small_data, small_data.d + 1)
    with pytest.raises(InvalidArgument):
        variance_ratio_filter(small_data, 0)


# ---------------------------------------------------------------- model files
def test_model_roundtrip(tmp_path):
    model = LinearModel([0.5, -0.25, 1.0], 0.125, FlameConfig(C=2.0, theta=0.3))
    path = tmp_path / "m.json"
    save_model(model, path)
    payload = json.loads(path.read_text())
    assert {"version", "d", "omega", "beta", "config"} <= set(payload)
    back = load_model(path)
    assert np.array_equal(back.direction, model.direction) and back.intercept == model.intercept


def test_model_validation():
    good = model_to_dict(LinearModel([1.0, 2.0], 0.0))
    for bad in (
        {**good, "d": 3},
        {**good, "version": 99},
        {**good, "omega": [1.0, float("inf")]},
        {k: v for k, v in good.items() if k != "beta"},
    ):
        with pytest.raises(DataError):
            model_from_dict(bad)
    assert model_from_dict(good).d == 2


def test_load_model_bad_json(tmp_path):
    path = write(tmp_path, "{not json", "m.json")
    with pytest.raises(DataError):
        load_model(path)
    with pytest.raises(MissingFileError):
        load_model(tmp_path / "none.json")
