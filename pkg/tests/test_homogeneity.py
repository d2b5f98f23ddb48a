import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelinfer.bootstrap import MultiplierSpec
from panelinfer.dgp import Ar1PanelSpec, simulate_ar1_panel
from panelinfer.homogeneity import (StageError, homogeneity_scores, infer_common_mean, infer_unit_means, max_test,
                                    q_statistic, test_common_mean, test_homogeneity, test_regression_heterogeneity,
                                    test_unit_means)
from panelinfer.longrun import KernelSpec
from panelinfer.panel import Panel, PanelError


def ar_panel(N=8, T=60, seed=0, rho_nu=0.5, shift=0.0):
    mu = np.zeros(N)
    mu[0] = shift
    return simulate_ar1_panel(Ar1PanelSpec.toeplitz(mu, 0.3, rho_nu), T, seed=seed)


def test_q_statistic_hand_example():
    p = Panel.from_array([[1.0, 2.0, 1.0, 2.0], [0.0, 1.0, 0.0, 1.0]])
    assert q_statistic(p) == pytest.approx(1.0)
    assert q_statistic(p, two_sided=False) == pytest.approx(1.0)
    flipped = Panel.from_array([[0.0, 1.0, 0.0, 1.0], [0.0, 1.0, 0.0, 1.0], [-3.0, -3.0, -3.0, -3.0]])
    assert q_statistic(flipped, two_sided=False) < q_statistic(flipped)


def test_cross_section_scores_sum_to_zero():
    p = ar_panel()
    s = homogeneity_scores(p)
    np.testing.assert_allclose(s.sum(axis=0), 0.0, atol=1e-12)
    np.testing.assert_array_equal(homogeneity_scores(p, "unit"), p.values)
    with pytest.raises(ValueError):
        homogeneity_scores(p, "time")


@given(st.floats(0.01, 100.0), st.booleans(), st.floats(-1e3, 1e3), st.integers(0, 10_000))
def test_affine_equivariance(a, negate, b, seed):
    a = -a if negate else a
    p = ar_panel(N=6, T=40, seed=seed)
    q = p.map_values(lambda v: a * v + b)
    r1 = test_homogeneity(p, R=199, seed=3)
    r2 = test_homogeneity(q, R=199, seed=3)
    assert r2.statistic == pytest.approx(abs(a) * r1.statistic, rel=1e-9)
    np.testing.assert_allclose(r2.draws.draws, abs(a) * r1.draws.draws, rtol=1e-8)
    assert r1.decisions == r2.decisions


@given(st.permutations(range(7)), st.integers(0, 10_000))
def test_permutation_invariance(perm, seed):
    p = ar_panel(N=7, T=40, seed=seed)
    q = p.subset(list(perm))
    r1 = test_homogeneity(p, R=199, seed=5)
    r2 = test_homogeneity(q, R=199, seed=5)
    assert r2.statistic == pytest.approx(r1.statistic, rel=1e-12)
    np.testing.assert_allclose(r2.draws.draws, r1.draws.draws, rtol=1e-10)
    assert r1.decisions == r2.decisions


def test_report_is_deterministic_and_serialisable():
    p = ar_panel()
    a, b = test_homogeneity(p, seed=9), test_homogeneity(p, seed=9)
    assert a.to_dict() == b.to_dict()
    d = a.to_dict(include_draws=True)
    assert d["schema_version"] == 1 and len(d["draws"]) == 399
    assert set(d["reject"]) == {"0.9", "0.95", "0.99"}


def test_decision_is_strict_exceedance():
    comp = np.array([1.0, -1.0])
    rep = max_test(comp, np.zeros((2, 10)), KernelSpec("bartlett", 2), 50, (0.95,), 0)
    # zero long-run covariance: every draw is 0, the statistic 1 exceeds it
    assert rep.decisions[0.95] and rep.p_value == pytest.approx(1 / 51)


def test_size_and_power_sanity():
    rej0 = [test_homogeneity(ar_panel(seed=s), R=199, levels=(0.95,), seed=s).decisions[0.95] for s in range(60)]
    rej1 = [test_homogeneity(ar_panel(seed=s, shift=1.0), R=199, levels=(0.95,), seed=s).decisions[0.95]
            for s in range(20)]
    assert np.mean(rej0) <= 0.15
    assert np.mean(rej1) == 1.0


def test_unbalanced_panel_runs_and_balanced_path_unchanged():
    p = ar_panel(T=60)
    mask = np.ones((p.N, p.T), dtype=bool)
    mask[2, :10] = False
    q = Panel(np.where(mask, p.values, np.nan), mask, p.unit_ids, p.time_ids)
    r = test_homogeneity(q, seed=1)
    assert r.config["balanced"] is False and np.isfinite(r.statistic)
    full = Panel(p.values, np.ones_like(mask), p.unit_ids, p.time_ids)
    a, b = test_homogeneity(full, seed=1), test_homogeneity(p, seed=1)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
    np.testing.assert_allclose(a.draws.draws, b.draws.draws, rtol=1e-12)


def test_stage_errors_are_labelled():
    p = ar_panel(T=20)
    with pytest.raises(StageError, match=r"^\[hac\]"):
        test_homogeneity(p, KernelSpec("bartlett", 25))
    with pytest.raises(StageError, match="two units"):
        test_homogeneity(p.subset([0]))


def test_regression_with_constant_reduces_to_mean_test():
    p = ar_panel(T=80)
    a = test_homogeneity(p, seed=4)
    b = test_regression_heterogeneity(p, np.ones(p.T), 0, seed=4)
    assert b.statistic == pytest.approx(a.statistic, rel=1e-12)
    np.testing.assert_allclose(b.draws.draws, a.draws.draws, rtol=1e-10)


def test_regression_detects_slope_heterogeneity(rng):
    T, N = 150, 10
    x = np.column_stack([np.ones(T), rng.standard_normal(T)])
    beta = np.ones(N)
    y0 = 0.5 + beta[:, None] * x[:, 1] + rng.standard_normal((N, T))
    beta[3] = 2.0
    y1 = 0.5 + beta[:, None] * x[:, 1] + rng.standard_normal((N, T))
    assert not test_regression_heterogeneity(Panel.from_array(y0), x, 1, seed=1).decisions[0.99]
    r = test_regression_heterogeneity(Panel.from_array(y1), x, 1, seed=1)
    assert r.decisions[0.99]
    assert r.config["unit_coefficients"][3] == pytest.approx(2.0, abs=0.3)
    with pytest.raises(PanelError, match="rank"):
        test_regression_heterogeneity(Panel.from_array(y0), np.column_stack([x, x[:, 1]]), 1)


def test_unit_intervals_contain_means_and_cover():
    spec = MultiplierSpec(KernelSpec("bartlett", 5), 100)
    hits = []
    for s in range(10):
        p = ar_panel(N=10, T=100, seed=s)
        rows = infer_unit_means(p, spec, R=199, seed=s)
        for r in rows:
            assert r.lower <= r.mean <= r.upper
        hits += [r.lower <= 0.0 <= r.upper for r in rows]
    assert 0.8 <= np.mean(hits) <= 1.0


def test_common_interval_and_tests():
    p = ar_panel(N=10, T=100, seed=2)
    ci = infer_common_mean(p, R=199, seed=1)
    assert ci.lower < ci.mean < ci.upper
    assert test_common_mean(p, 5.0, R=199, seed=1).reject
    res = test_unit_means(p, np.r_[5.0, np.zeros(9)], R=199, seed=1)
    assert res[0].reject and len(res) == 10


def test_per_unit_regression_path_matches_balanced_formula(rng):
    from panelinfer.homogeneity import _regression_parts
    T = 70
    x = np.column_stack([np.ones(T), rng.standard_normal(T), rng.standard_normal(T)])
    y = Panel.from_array(rng.standard_normal((5, T)) + rng.standard_normal((5, 1)) * x[:, 1])
    for j in range(3):
        comp, scores, coefs = _regression_parts(y, x, j)
        others = np.delete(x, j, axis=1)
        xt = x[:, j] - others @ np.linalg.lstsq(others, x[:, j], rcond=None)[0]
        np.testing.assert_allclose(comp, (y.values - y.values.mean(axis=0)) @ xt / np.sqrt(T), atol=1e-12)
        resid = y.values - coefs @ x.T
        np.testing.assert_allclose(scores, (resid - resid.mean(axis=0)) * xt, atol=1e-12)


def test_regression_on_unbalanced_panel(rng):
    T = 90
    x = np.column_stack([np.ones(T), rng.standard_normal(T)])
    beta = np.r_[3.0, np.ones(7)]
    vals = beta[:, None] * x[:, 1] + rng.standard_normal((8, T))
    mask = np.ones_like(vals, dtype=bool)
    mask[1, :20] = False
    mask[4, 70:] = False
    y = Panel(np.where(mask, vals, np.nan), mask, tuple("abcdefgh"), tuple(map(str, range(T))))
    rep = test_regression_heterogeneity(y, x, 1, seed=2)
    assert rep.config["balanced"] is False and rep.decisions[0.99]
    short = mask.copy()
    short[2, 5:] = False
    with pytest.raises(PanelError, match="periods"):
        test_regression_heterogeneity(Panel(np.where(short, vals, np.nan), short, y.unit_ids, y.time_ids), x, 1)
