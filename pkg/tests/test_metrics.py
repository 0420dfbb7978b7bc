from __future__ import annotations

import numpy as np
import pytest

from flame.core import FlameConfig, InvalidArgument, LinearModel
from flame.metrics import (
    DispersionInput,
    MetricRecord,
    angle_between,
    dispersion,
    dispersion_report,
    evaluate_model,
    intercept_deviation,
    mean_within_class_error,
    rank_comp,
)
from flame.simgen import one_dim_imbalance_spec, sample_two_class
from flame.solver import fit


# ---------------------------------------------------------------- MWE
def test_mwe_examples():
    assert mean_within_class_error([1, -1, -1], [1, -1, -1]) == 0.0
    assert mean_within_class_error([1, 1, 1, 1], [1, 1, -1, -1]) == 0.5
    labels = [1, 1, -1, -1, -1, -1]
    preds = [1, -1, -1, -1, -1, 1]
    assert mean_within_class_error(preds, labels) == pytest.approx(0.375, abs=0)


def test_mwe_errors():
    with pytest.raises(InvalidArgument):
        mean_within_class_error([1, 1], [1, 1])
    with pytest.raises(InvalidArgument):
        mean_within_class_error([1, -1], [1, -1, 1])
    with pytest.raises(InvalidArgument):
        mean_within_class_error([1, 0], [1, -1])


def test_mwe_invariants():
    rng = np.random.default_rng(0)
    y = np.where(rng.random(40) < 0.3, 1, -1)
    y[:2] = (1, -1)
    p = np.where(rng.random(40) < 0.5, 1, -1)
    base = mean_within_class_error(p, y)
    assert mean_within_class_error(np.r_[p, p], np.r_[y, y]) == pytest.approx(base)
    # balanced labels with equal per-class errors: plain error rate
    y2 = np.array([1, 1, 1, 1, -1, -1, -1, -1])
    p2 = np.array([1, 1, 1, -1, -1, -1, -1, 1])
    assert mean_within_class_error(p2, y2) == pytest.approx(np.mean(p2 != y2))


# ---------------------------------------------------------------- RankComp
def test_rank_comp_examples():
    assert rank_comp([0.3, -2.0, 1.0], [0.3, -2.0, 1.0]) == 0.0
    assert rank_comp([1, 2], [2, 1]) == 1.0
    assert rank_comp([3, 1, 2], [3, 2, 1]) == pytest.approx(1 / 3)


def test_rank_comp_ties_not_discordant():
    assert rank_comp([0.0, 0.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


def test_rank_comp_properties():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(size=7), rng.normal(size=7)
        r = rank_comp(a, b)
        assert 0.0 <= r <= 1.0
        assert rank_comp(b, a) == r
        assert rank_comp(-3.5 * a, 0.2 * b) == r


def test_rank_comp_errors():
    with pytest.raises(InvalidArgument):
        rank_comp([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(InvalidArgument):
        rank_comp([1.0], [1.0])


# ---------------------------------------------------------------- dispersion
def test_dispersion_examples():
    assert dispersion([[0.6, 0.8], [0.6, 0.8], [3.0, 4.0]]) == pytest.approx(0.0, abs=1e-15)
    assert dispersion([[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(1.0)


def test_dispersion_sign_alignment_and_raw():
    rep = dispersion_report(DispersionInput([[1.0, 0.0], [-1.0, 0.0]]))
    assert rep.aligned == pytest.approx(0.0)
    assert rep.raw == pytest.approx(2.0)


def test_dispersion_properties():
    rng = np.random.default_rng(2)
    dirs = rng.normal(size=(6, 4)) + [3, 0, 0, 0]
    base = dispersion(dirs)
    assert dispersion(dirs[rng.permutation(6)]) == pytest.approx(base)
    assert base > 0


def test_dispersion_errors():
    with pytest.raises(InvalidArgument):
        DispersionInput([[1.0, 0.0]])
    with pytest.raises(InvalidArgument):
        dispersion([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(InvalidArgument):
        DispersionInput([[1.0, np.nan], [0.0, 1.0]])


# ---------------------------------------------------------------- angle
def test_angle_examples():
    w = np.array([0.4, -1.2, 2.0])
    assert angle_between(2.5 * w, w) == pytest.approx(0.0, abs=1e-6)
    assert angle_between([1.0, 0.0], [0.0, 3.0]) == pytest.approx(90.0)
    assert angle_between([1.0, 1.0], [1.0, 0.0]) == pytest.approx(45.0)
    assert angle_between(w, -w) == pytest.approx(180.0)
    with pytest.raises(InvalidArgument):
        angle_between([0.0, 0.0], [1.0, 0.0])


def test_angle_scaling_invariance():
    a, b = np.array([1.0, 2.0, -1.0]), np.array([0.5, 0.1, 0.7])
    assert angle_between(7 * a, 0.3 * b) == pytest.approx(angle_between(a, b))


# ---------------------------------------------------------------- intercept deviation
def test_intercept_deviation_examples():
    assert intercept_deviation(0.3, 0.3) == 0.0
    assert intercept_deviation(-1, 1) == 2.0
    with pytest.raises(InvalidArgument):
        intercept_deviation(np.inf, 0.0)


def test_dwd_intercept_deviation_exceeds_svm_on_imbalanced_1d():
    data = sample_two_class(one_dim_imbalance_spec(3, seed=4))
    dwd = fit(data, FlameConfig(theta=0.0))[0].normalized().intercept
    svm = fit(data, FlameConfig(theta=1.0))[0].normalized().intercept
    assert intercept_deviation(dwd, 0.0) > intercept_deviation(svm, 0.0)


# ---------------------------------------------------------------- record
def test_metric_record_validation():
    MetricRecord(0.1, 0.0, 180.0, 1.0)
    with pytest.raises(InvalidArgument):
        MetricRecord(1.5, 0.0, 10.0, 0.0)
    with pytest.raises(InvalidArgument):
        MetricRecord(0.1, -1.0, 10.0, 0.0)
    with pytest.raises(InvalidArgument):
        MetricRecord(0.1, 0.0, float("nan"), 0.0)


def test_evaluate_model_against_itself():
    ref = LinearModel([2.0, 1.0], -0.5)
    X = np.array([[1.0, 0.0], [2.0, 1.0], [-1.0, 0.0], [-2.0, -1.0]])
    y = np.array([1, 1, -1, -1])
    rec = evaluate_model(LinearModel([4.0, 2.0], -1.0), ref, X, y)
    assert rec.mwe == 0.0
    assert rec.angle == pytest.approx(0.0, abs=1e-6)
    assert rec.intercept_deviation == pytest.approx(0.0, abs=1e-12)
    assert rec.rank_comp == 0.0
