from __future__ import annotations

import math

import numpy as np
import pytest

from flame.core import InvalidArgument, LinearModel
from flame.verify import (
    RegimeInterval,
    conditional_risk,
    dwd_intercept_bound,
    fisher_minimizer,
    grid_minimizer,
    hdlss_regime,
    loglog_slope,
    monte_carlo_gamma,
    regime_boundaries,
    run_checks,
    run_fisher_check,
    run_geometry_continuity,
    run_support_fraction,
    simplex_geometry,
    spherical_gamma_floor,
    summarize,
    svm_support_fraction_check,
    write_jsonl,
)


# ---------------------------------------------------------------- Fisher consistency
def test_fisher_minimizer_closed_form_at_p_08():
    # The stationary point of p/f + (1-p)(2 sqrt C + C f) is sqrt(p/((1-p)C)),
    # which is 2 here; 0.5 lies on the linear branch where the risk still
    # decreases (see the decisions log).
    f = fisher_minimizer(0.8, 1.0)
    assert f == pytest.approx(2.0)
    g, step = grid_minimizer(0.8, 1.0, 0.0)
    assert abs(g - f) <= step
    assert conditional_risk(2.0, 0.8, 1.0, 0.0) < conditional_risk(0.5, 0.8, 1.0, 0.0)


def test_fisher_minimizer_flat_interval_and_mirror():
    assert fisher_minimizer(0.5, 4.0) == (-0.5, 0.5)
    assert fisher_minimizer(0.2, 1.0) == pytest.approx(-2.0)
    # truncation at the zero branch start for theta > 0
    assert fisher_minimizer(0.9, 1.0, 0.5) == pytest.approx(2.0)
    risk = conditional_risk(np.linspace(-0.5, 0.5, 11), 0.5, 4.0, 0.0)
    assert np.ptp(risk) <= 1e-12
    with pytest.raises(InvalidArgument):
        fisher_minimizer(1.0, 1.0)
    with pytest.raises(InvalidArgument):
        fisher_minimizer(0.3, 0.0)


def test_fisher_grid_cross_check():
    records = run_fisher_check(cases=50, seed=3, points=100_001)
    assert all(r["match"] for r in records)
    assert all(r["sign_ok"] for r in records)


# ---------------------------------------------------------------- intercept bound
def test_dwd_intercept_bound_examples():
    assert dwd_intercept_bound(10, 40, 1.0, 0.0, 0.3, -0.31)
    assert not dwd_intercept_bound(10, 40, 1.0, 0.0, 0.3, -0.29)
    # quadrupling m doubles the sqrt(m) term
    t4 = math.sqrt(0.15 * 4)
    t16 = math.sqrt(0.15 * 16)
    assert t16 == pytest.approx(2 * t4)
    assert dwd_intercept_bound(10, 160, 1.0, 0.15, 0.0, -t16 - 1e-9)
    assert not dwd_intercept_bound(10, 160, 1.0, 0.15, 0.0, -t16 + 1e-9)
    with pytest.raises(InvalidArgument):
        dwd_intercept_bound(10, 40, 1.0, 1.0, 0.0, 0.0)


def test_gamma_floor_analytic_and_monte_carlo():
    floor = spherical_gamma_floor([1.0, 0.0])
    assert floor == pytest.approx(0.15865525393145707)
    mc = monte_carlo_gamma([1.0, 0.0], samples=100_000, directions=400, seed=1)
    assert abs(mc - floor) <= 0.01
    assert floor > 0.15


def test_loglog_slope():
    ms = [4, 9, 16, 25]
    assert loglog_slope(ms, [3 * math.sqrt(m) for m in ms]) == pytest.approx(0.5)


# ---------------------------------------------------------------- support fraction
def test_svm_support_fraction_check_counts():
    model = LinearModel([1.0], 0.0)
    assert svm_support_fraction_check(model, [[-2.0], [-1.0], [-0.5], [3.0]]) == 0.5


def test_support_fraction_m10_within_005():
    (rec,) = run_support_fraction(ms=(10,), seed=2)
    assert abs(rec["fraction"] - 0.9) <= 0.05
    (skip,) = run_support_fraction(ms=(1,))
    assert skip["skipped"]


# ---------------------------------------------------------------- HDLSS regimes
def test_regime_endpoints():
    r0 = hdlss_regime(0.0, 1.0, 100, 1.0, 1.0, 1.0, 4, 16)
    assert r0.interval is RegimeInterval.DWD_LIKE and r0.T is None
    r1 = hdlss_regime(1.0, 1.0, 10_000, 1.0, 1.0, 1.0, 4, 16)
    assert r1.upper < 1 and r1.interval is RegimeInterval.SVM_LIKE
    assert 0 < r1.lower < r1.upper


def test_regime_thresholds():
    m, s2, t2 = 4.0, 1.0, 1.0
    r = hdlss_regime(0.0, 1.0, 100, 0.5, s2, t2, 4, 16)
    assert r.positive_threshold == pytest.approx(math.sqrt(m) * s2 / 4 - t2 / 16)
    r = hdlss_regime(1.0, 1.0, 10_000, 0.5, s2, t2, 4, 16)
    assert r.positive_threshold == pytest.approx(s2 / 4 - t2 / 16)
    lower, upper = regime_boundaries(1.0, 4000, r.nu, m)
    theta = 0.5 * (lower + upper)
    ri = hdlss_regime(theta, 1.0, 4000, 0.5, s2, t2, 4, 16)
    assert ri.interval is RegimeInterval.INTERMEDIATE
    q = theta * math.sqrt(4000)
    T = (1 / (2 * q) + math.sqrt(1 / (4 * q * q) + s2 / 4)) ** 2 - s2 / 4
    assert ri.T == pytest.approx(T) and ri.positive_threshold == pytest.approx(T - t2 / 16)
    with pytest.raises(InvalidArgument):
        hdlss_regime(0.5, 1.0, 100, 1.0, 1.0, 1.0, 16, 4)


def test_boundaries_shrink_with_dimension():
    prev = regime_boundaries(1.0, 10, 1.0, 4)
    for d in (1e2, 1e4, 1e6, 1e8):
        cur = regime_boundaries(1.0, d, 1.0, 4)
        assert cur[0] < prev[0] and cur[1] < prev[1]
        prev = cur
    assert prev[1] < 1e-3
    assert hdlss_regime(0.01, 1.0, 1e8, 1.0, 1.0, 1.0, 4, 16).interval is RegimeInterval.SVM_LIKE


# ---------------------------------------------------------------- simplex geometry
def test_simplex_examples():
    for theta in (0.0, 0.5, 1.0):
        g = simplex_geometry(theta, 1.0, 400, 1.0, 1.0)
        assert g.a == pytest.approx(g.b)
    g = simplex_geometry(0.0, 1.0, 400, 1.0, 9.0)
    assert g.a / g.b == pytest.approx(1 / 3)
    C, d, nu, m = 2.0, 900, 1.3, 4.0
    lower, upper = regime_boundaries(C, d, nu, m)
    total = nu * math.sqrt(d)
    at_upper = 1.0 / (upper * math.sqrt(C))
    assert abs(at_upper - total / 2) <= 1e-10 * total
    at_lower = simplex_geometry(lower, C, d, nu, m)
    assert abs(at_lower.b - simplex_geometry(0.0, C, d, nu, m).b) <= 1e-10 * total


def test_simplex_monotone_in_theta():
    C, d, nu, m = 1.0, 2500, 1.0, 6.0
    thetas = np.linspace(0, 1, 401)
    geo = [simplex_geometry(t, C, d, nu, m) for t in thetas]
    a = np.array([g.a for g in geo])
    b = np.array([g.b for g in geo])
    assert np.all(np.diff(a) >= -1e-12) and np.all(np.diff(b) <= 1e-12)
    assert np.allclose(a + b, nu * math.sqrt(d), rtol=1e-9)
    kinds = [g.interval for g in geo]
    assert kinds[0] is RegimeInterval.DWD_LIKE and kinds[-1] is RegimeInterval.SVM_LIKE
    assert RegimeInterval.INTERMEDIATE in kinds


def test_geometry_continuity_harness():
    records = run_geometry_continuity(cases=50, seed=5)
    (verdict,) = summarize(records)
    assert verdict["passed"] and verdict["max_gap"] <= 1e-10


# ---------------------------------------------------------------- report plumbing
def test_run_checks_and_jsonl(tmp_path):
    records = run_checks(["fisher", "geometry"], seed=1)
    verdicts = summarize(records)
    assert [v["check"] for v in verdicts] == ["fisher_minimizer", "geometry_continuity"]
    assert all(v["passed"] for v in verdicts)
    path = tmp_path / "v.jsonl"
    write_jsonl(records, path)
    assert len(path.read_text().splitlines()) == len(records)
    with pytest.raises(InvalidArgument):
        run_checks(["nope"])
