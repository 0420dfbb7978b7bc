from __future__ import annotations

import math

import numpy as np
import pytest

from flame.core import FlameConfig, InvalidArgument, LabeledDataset, SolverFailure
from flame.crossval import CvConfig
from flame.simgen import covariance_structure_spec, sample_two_class, spec_bayes_rule
from flame.tuning import (
    adaptive_theta,
    equal_tradeoff_theta,
    normalize_curve,
    select_crossing,
    theta_update,
)

from conftest import gaussian_pair


# ---------------------------------------------------------------- crossing rule
def test_select_crossing_examples():
    assert select_crossing([0, 0.5, 1], [1, 0.5, 0], [0, 0.5, 1]) == (0.5, True)
    assert select_crossing([0, 0.5, 1], [1, 0, 0], [0, 0, 1]) == (0.5, True)


def test_select_crossing_interpolates_and_flags():
    theta, crossed = select_crossing([0, 0.5, 1], [1, 0.4, 0], [0, 0.6, 1])
    assert crossed and theta == pytest.approx(5 / 12)
    theta, crossed = select_crossing([0, 0.5, 1], [1, 0.9, 0.8], [0, 0.2, 0.5])
    assert not crossed and theta == 1.0


def test_normalize_curve():
    assert normalize_curve([2.0, 4.0, 3.0]) == pytest.approx([0.0, 1.0, 0.5])
    assert np.array_equal(normalize_curve([0.3, 0.3, 0.3]), np.zeros(3))


# ---------------------------------------------------------------- update rule
def test_theta_update_clamps():
    assert theta_update(0.0, 2.0, 1.0) == 0.5
    assert theta_update(0.7, 2.0, 1.0) == 0.7
    assert theta_update(0.2, 0.5, 1.0) == 1.0
    assert theta_update(0.2, 0.0, 1.0) == 1.0
    assert theta_update(0.2, -3.0, 4.0) == 1.0


# ---------------------------------------------------------------- adaptive iteration
def replay(data, trace):
    """Independent re-implementation of the update on stored fits."""
    X, y = data.features, data.labels
    thetas = [0.0]
    for step in trace.steps:
        margins = y * (X @ step.direction + step.intercept)
        g = np.sort(margins[y == -1])[data.n_pos - 1]
        nxt = 1.0 if g <= 0 else min(1.0, max(thetas[-1], 1.0 / (g * math.sqrt(trace.C))))
        thetas.append(nxt)
    return np.array(thetas)


def test_adaptive_trace_matches_margin_replay():
    data = gaussian_pair(4, 4, 8, 2, shift=1.2)
    assert (data.n, data.d) == (12, 2)
    theta, trace = adaptive_theta(data, FlameConfig())
    assert trace.terminated
    replayed = replay(data, trace)
    assert np.array_equal(replayed[:-1], trace.thetas)
    assert replayed[-1] == theta


def test_adaptive_one_step_variant():
    data = gaussian_pair(1, 10, 30, 3, shift=1.5)
    theta, trace = adaptive_theta(data, FlameConfig(), max_steps=1)
    assert len(trace.steps) == 1 and trace.thetas[0] == 0.0
    assert theta == trace.steps[0].next_theta
    assert 0.0 <= theta <= 1.0


@pytest.mark.parametrize("seed", range(4))
def test_adaptive_monotone(seed):
    data = gaussian_pair(seed, 8, 24, 4, shift=1.0)
    for cfg in (FlameConfig(), FlameConfig(formulation="penalized", lam=0.5)):
        theta, trace = adaptive_theta(data, cfg)
        seq = np.r_[trace.thetas, theta]
        assert np.all(np.diff(seq) >= 0)
        assert np.all(np.diff(trace.objectives) <= 1e-9)
        assert np.all(np.isfinite(trace.objectives)) and 0.0 <= theta <= 1.0
        # no theta value repeats more than twice along a run
        _, counts = np.unique(seq, return_counts=True)
        assert counts.max() <= 2


def test_adaptive_far_separated_majority_keeps_small_theta():
    # Majority margins far beyond the turning point give 1/(g sqrt C) close
    # to zero, so the update max(theta, 1/(g sqrt C)) stays near 0 rather
    # than jumping to 1 (see the decisions log).
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(5, 2)) * 0.1 + [50, 0], rng.normal(size=(10, 2)) * 0.1 - [50, 0]])
    data = LabeledDataset(X, np.r_[np.ones(5), -np.ones(10)])
    theta, trace = adaptive_theta(data, FlameConfig(C=1.0))
    assert trace.terminated
    g = trace.steps[-1].g_order
    assert g > 40
    assert theta == pytest.approx(1.0 / g, rel=1e-6)


def test_adaptive_rejects_majority_positive_class():
    data = gaussian_pair(0, 20, 10, 2, shift=1.0)
    with pytest.raises(InvalidArgument):
        adaptive_theta(data, FlameConfig())
    with pytest.raises(InvalidArgument):
        adaptive_theta(data.flipped(), FlameConfig(), max_steps=0)


def test_adaptive_failure_carries_partial_trace(monkeypatch):
    import flame.tuning as tuning

    real_fit = tuning.fit
    calls = []

    def failing_fit(data, cfg):
        calls.append(cfg.theta)
        if len(calls) == 2:
            raise SolverFailure("injected")
        return real_fit(data, cfg)

    monkeypatch.setattr(tuning, "fit", failing_fit)
    data = gaussian_pair(2, 6, 12, 2, shift=0.5)
    with pytest.raises(SolverFailure) as info:
        adaptive_theta(data, FlameConfig())
    partial = info.value.partial
    assert partial is not None and not partial.terminated
    assert len(partial.steps) == 1 and partial.steps[0].theta == 0.0


# ---------------------------------------------------------------- equal trade-off
def small_tradeoff_problem():
    data = gaussian_pair(6, 15, 30, 5, shift=1.0)
    ref = np.array([1.0, 0.8, 0.6, 0.4, 0.2])
    return data, ref


def test_equal_tradeoff_reference_rescaling_invariance():
    data, ref = small_tradeoff_problem()
    grid = np.linspace(0, 1, 5)
    cv = CvConfig(folds=3, seed=1)
    a, ca = equal_tradeoff_theta(data, grid, cv, ref)
    b, cb = equal_tradeoff_theta(data, grid, cv, 3.7 * ref)
    assert a == b
    assert np.array_equal(ca.rank_comp, cb.rank_comp)
    assert 0.0 <= a <= 1.0
    for curve in (ca.error_norm, ca.rank_comp_norm):
        assert curve.min() == 0.0 and curve.max() in (0.0, 1.0)


def test_equal_tradeoff_validation():
    data, ref = small_tradeoff_problem()
    with pytest.raises(InvalidArgument):
        equal_tradeoff_theta(data, [0.0, 1.0], None, ref)
    with pytest.raises(InvalidArgument):
        equal_tradeoff_theta(data, [0.0, 0.6, 0.5], None, ref)
    with pytest.raises(InvalidArgument):
        equal_tradeoff_theta(data, [0.0, 0.5, 1.0], None, np.zeros(5))


@pytest.mark.slow
def test_equal_tradeoff_interior_on_interchangeable_design():
    grid = np.linspace(0, 1, 11)
    interior = 0
    for r in range(20):
        spec = covariance_structure_spec("interchangeable", 3, seed=1000 + r, d=50, n_total=120)
        data = sample_two_class(spec)
        theta, _ = equal_tradeoff_theta(data, grid, CvConfig(folds=5, seed=r), spec_bayes_rule(spec))
        interior += 0.0 < theta < 1.0
    assert interior >= 18
