from __future__ import annotations

import math

import numpy as np
import pytest

from flame.core import FlameConfig, InvalidArgument
from flame.metrics import mean_within_class_error
from flame.simgen import (
    CovarianceSpec,
    TwoClassGaussianSpec,
    bayes_rule,
    block_comparison_spec,
    covariance_structure_spec,
    increasing_dimension_spec,
    mahalanobis_sq,
    make_covariance,
    proportional_blocks,
    sample_two_class,
    scale_mean_to_mahalanobis,
    spec_bayes_rule,
    split_sizes,
)
from flame.solver import fit


# ---------------------------------------------------------------- covariance
def test_covariance_examples():
    assert np.array_equal(make_covariance(CovarianceSpec.identity(3)), np.eye(3))
    assert np.array_equal(make_covariance(CovarianceSpec.interchangeable(2, 0.8)),
                          [[1.0, 0.8], [0.8, 1.0]])
    blocks = (150, 100, 25, 15, 10)
    sigma = make_covariance(CovarianceSpec.block_interchangeable(blocks, 0.8))
    assert sigma.shape == (300, 300)
    assert np.array_equal(sigma, sigma.T)
    edges = np.cumsum((0,) + blocks)
    for lo, hi in zip(edges[:-1], edges[1:]):
        blk = sigma[lo:hi, lo:hi]
        assert np.all(np.diag(blk) == 1.0)
        assert np.all(blk[~np.eye(hi - lo, dtype=bool)] == 0.8)
        sigma[lo:hi, lo:hi] = 0.0
    assert not np.any(sigma)


def test_interchangeable_eigenvalues():
    d, rho = 20, 0.8
    ev = np.sort(np.linalg.eigvalsh(make_covariance(CovarianceSpec.interchangeable(d, rho))))
    assert np.allclose(ev[:-1], 1 - rho, atol=1e-10)
    assert ev[-1] == pytest.approx(1 + (d - 1) * rho, abs=1e-10)


def test_covariance_rejects_non_positive_definite():
    with pytest.raises(InvalidArgument):
        CovarianceSpec.interchangeable(5, -0.3)
    with pytest.raises(InvalidArgument):
        CovarianceSpec.interchangeable(5, 1.0)
    with pytest.raises(InvalidArgument):
        CovarianceSpec("block_interchangeable", 10, 0.5, (4, 4))


# ---------------------------------------------------------------- mean scaling
def test_scale_mean_examples():
    mu = scale_mean_to_mahalanobis([1.0, 0.0], np.eye(2), 4.0)
    assert mu == pytest.approx([1.0, 0.0])
    sigma = make_covariance(CovarianceSpec.interchangeable(300, 0.8))
    mu1 = np.zeros(300)
    mu1[:75] = np.arange(75, 0, -1)
    mu = scale_mean_to_mahalanobis(mu1, sigma, 5.4)
    assert abs(mahalanobis_sq(mu, -mu, sigma) - 5.4) / 5.4 <= 1e-10
    c1 = mu[0] / mu1[0]
    c2 = scale_mean_to_mahalanobis(mu1, sigma, 10.8)[0] / mu1[0]
    assert c2 / c1 == pytest.approx(math.sqrt(2), rel=1e-12)
    # applying the scaling to an already scaled mean is a fixed point
    assert scale_mean_to_mahalanobis(mu, sigma, 5.4) == pytest.approx(mu, rel=1e-10)


def test_scale_mean_errors():
    with pytest.raises(InvalidArgument):
        scale_mean_to_mahalanobis([0.0, 0.0], np.eye(2), 1.0)
    with pytest.raises(InvalidArgument):
        scale_mean_to_mahalanobis([1.0, 0.0], np.eye(2), -1.0)
    with pytest.raises(InvalidArgument):
        scale_mean_to_mahalanobis([1.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], 1.0)


# ---------------------------------------------------------------- sampling
def test_large_sample_moments():
    sigma = CovarianceSpec.interchangeable(4, 0.5)
    mu = np.array([0.5, -0.2, 0.0, 1.0])
    spec = TwoClassGaussianSpec(mu, -mu, sigma, 50_000, 50_000, seed=3)
    data = sample_two_class(spec)
    bound = 3 * math.sqrt(1.0 / 50_000)
    assert np.all(np.abs(data.features[data.labels == 1].mean(0) - mu) <= bound)
    assert np.all(np.abs(data.features[data.labels == -1].mean(0) + mu) <= bound)


def test_seed_determinism():
    spec = covariance_structure_spec("block_interchangeable", 3, seed=5, d=40, n_total=60)
    a, b = sample_two_class(spec), sample_two_class(spec)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, sample_two_class(spec, seed=6).features)


def test_increasing_dimension_shape():
    spec = increasing_dimension_spec(100, 1)
    assert np.linalg.norm(spec.mu_plus) == pytest.approx(2.7)
    assert np.all(np.diff(spec.mu_plus) < 0)
    data = sample_two_class(spec)
    assert data.features.shape == (240, 100)
    assert (data.n_pos, data.n_neg) == (120, 120)


def test_split_sizes_and_blocks():
    assert split_sizes(240, 3) == (60, 180)
    assert split_sizes(120, 1) == (60, 60)
    assert proportional_blocks(10, (0.5, 0.25, 0.25)) == (5, 2, 3)
    spec = block_comparison_spec(50)
    assert spec.covariance.blocks == (25, 12, 13)
    with pytest.raises(InvalidArgument):
        split_sizes(10, 0.5)


def test_spec_roundtrip():
    spec = covariance_structure_spec("interchangeable", 3, seed=2, d=20, n_total=40)
    assert TwoClassGaussianSpec.from_dict(spec.to_dict()) == spec


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        TwoClassGaussianSpec([0.0, 1.0], [0.0], CovarianceSpec.identity(2), 5, 5)
    with pytest.raises(InvalidArgument):
        TwoClassGaussianSpec([0.0], [1.0], CovarianceSpec.identity(1), 0, 5)


# ---------------------------------------------------------------- Bayes rule
def test_bayes_rule_examples():
    mu0 = np.array([0.3, -1.0, 2.0])
    rule = bayes_rule(mu0, -mu0, np.eye(3))
    assert rule.direction == pytest.approx(2 * mu0)
    assert rule.intercept == pytest.approx(0.0)
    rule = bayes_rule([1.0, 2.0], [0.0, 0.0], np.diag([1.0, 4.0]))
    assert rule.direction == pytest.approx([1.0, 0.5])
    assert rule.intercept == pytest.approx(-1.0)
    c = np.array([2.0, -3.0])
    moved = bayes_rule(np.array([1.0, 2.0]) + c, c, np.diag([1.0, 4.0]))
    assert moved.direction == pytest.approx(rule.direction)
    assert moved.intercept == pytest.approx(rule.intercept - c @ rule.direction)
    with pytest.raises(InvalidArgument):
        bayes_rule([1.0, 0.0], [0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])


def test_bayes_rule_is_gold_standard():
    train_spec = covariance_structure_spec("interchangeable", 1, seed=1, d=10, n_total=120)
    test = sample_two_class(train_spec.with_(n_plus=10_000, n_minus=10_000, seed=99))
    train = sample_two_class(train_spec)
    bayes = spec_bayes_rule(train_spec)
    best = mean_within_class_error(bayes.predict(test.features), test.labels)
    for theta in (0.0, 0.5, 1.0):
        model, _ = fit(train, FlameConfig(theta=theta))
        assert best <= mean_within_class_error(model.predict(test.features), test.labels) + 0.01
