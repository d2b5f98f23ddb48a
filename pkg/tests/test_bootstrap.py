import numpy as np
import pytest
from scipy import linalg, stats

from panelinfer.bootstrap import (BootstrapDraws, MultiplierError, MultiplierSpec, bootstrap_heterogeneous,
                                  bootstrap_homogeneous, draw_multiplier_matrix, draw_multipliers,
                                  gaussian_multiplier_max, gaussian_multiplier_max_unbalanced,
                                  multiplier_factor)
from panelinfer.longrun import KernelSpec, kernel_eval
from panelinfer.panel import Panel, PanelError


def dense_factor(fac):
    T = fac.shape[1]
    L = np.zeros((T, T))
    for d in range(fac.shape[0]):
        L += np.diag(fac[d, :T - d], -d)
    return L


@pytest.mark.parametrize("family,m", [("bartlett", 1), ("bartlett", 6), ("parzen", 4), ("tukey_hanning", 2)])
def test_factor_reproduces_kernel_toeplitz(family, m):
    spec = MultiplierSpec(KernelSpec(family, m), 30)
    L = dense_factor(multiplier_factor(spec))
    lags = np.abs(np.subtract.outer(np.arange(30), np.arange(30))) / m
    np.testing.assert_allclose(L @ L.T, kernel_eval(spec.kernel, lags), atol=1e-12)


@pytest.mark.parametrize("family,m", [("qs_truncated", 2), ("trapezoid", 5), ("tukey_hanning", 5)])
def test_indefinite_kernels_refused(family, m):
    with pytest.raises(MultiplierError, match="indefinite"):
        multiplier_factor(MultiplierSpec(KernelSpec(family, m), 100))


def test_bandwidth_must_be_below_T():
    with pytest.raises(MultiplierError):
        MultiplierSpec(KernelSpec("bartlett", 10), 10)


def test_multiplier_matrix_rows_match_single_draws():
    spec = MultiplierSpec(KernelSpec("parzen", 3), 25)
    mat = draw_multiplier_matrix(spec, 5, seed=4)
    for r in range(5):
        np.testing.assert_array_equal(mat[r], draw_multipliers(spec, 4, r))


def test_multiplier_covariance_across_draws():
    spec = MultiplierSpec(KernelSpec("bartlett", 4), 12)
    z = draw_multiplier_matrix(spec, 40_000, seed=1)
    lags = np.abs(np.subtract.outer(np.arange(12), np.arange(12))) / 4
    np.testing.assert_allclose(z.T @ z / z.shape[0], kernel_eval(spec.kernel, lags), atol=0.03)


def test_gaussian_max_quantiles_identity():
    q1 = gaussian_multiplier_max(np.eye(1), 50, R=20_000, seed=0).quantile(0.95)
    assert q1 == pytest.approx(stats.norm.ppf(0.975), rel=0.03)
    want = stats.norm.ppf(0.5 + 0.5 * 0.95 ** (1 / 100))
    q100 = gaussian_multiplier_max(np.eye(100), 50, R=20_000, seed=0).quantile(0.95)
    assert q100 == pytest.approx(want, rel=0.03)


def test_gaussian_exact_path_same_law():
    s = linalg.sqrtm(0.5 * np.eye(4) + 0.5).real
    fast = gaussian_multiplier_max(s, 20, R=8000, seed=2).quantile(0.9)
    slow = gaussian_multiplier_max(s, 20, R=8000, seed=3, exact=True).quantile(0.9)
    assert fast == pytest.approx(slow, rel=0.04)
    unb = gaussian_multiplier_max_unbalanced(s, [5, 9, 20, 20], R=8000, seed=4, exact=True).quantile(0.9)
    assert unb == pytest.approx(fast, rel=0.04)


def test_studentized_draws_are_standard_normal(rng):
    x = rng.standard_normal((4, 80)) + 3.0
    spec = MultiplierSpec(KernelSpec("bartlett", 5), 80)
    d = bootstrap_homogeneous(Panel.from_array(x), None, spec, R=20_000, seed=1)
    assert d.draws.mean() == pytest.approx(0.0, abs=0.03)
    assert d.draws.var() == pytest.approx(1.0, abs=0.04)
    assert not d.degenerate
    s = (x - x.mean()).sum(axis=0)
    assert d.scale ** 2 == pytest.approx(float(s @ linalg.toeplitz(kernel_eval(spec.kernel, np.arange(80) / 5)) @ s))


def test_degenerate_unit_flagged():
    x = np.vstack([np.full(20, 2.0), np.arange(20.0)])
    spec = MultiplierSpec(KernelSpec("bartlett", 3), 20)
    d = bootstrap_heterogeneous(Panel.from_array(x), 0, None, spec, R=50, seed=0)
    assert d.degenerate and np.all(d.draws == 0.0)


def test_heterogeneous_uses_observed_periods_only(rng):
    x = rng.standard_normal((2, 30))
    mask = np.ones_like(x, dtype=bool)
    mask[0, 20:] = False
    spec = MultiplierSpec(KernelSpec("bartlett", 3), 30)
    zeta = draw_multiplier_matrix(spec, 10, seed=0)
    d = bootstrap_heterogeneous(Panel.from_array(x, mask), 0, None, spec, zeta=zeta)
    s = np.where(mask[0], x[0] - x[0, :20].mean(), 0.0)
    np.testing.assert_allclose(d.draws * d.scale, zeta @ s, atol=1e-12)


def test_homogeneous_requires_matching_length(rng):
    p = Panel.from_array(rng.standard_normal((2, 30)))
    with pytest.raises(PanelError):
        bootstrap_homogeneous(p, 0.0, MultiplierSpec(KernelSpec("bartlett", 3), 20))


def test_p_value_counts_ties():
    d = BootstrapDraws(np.array([1.0, 2.0, 3.0]))
    assert d.p_value(2.0) == pytest.approx(3 / 4)
    assert d.p_value(10.0) == pytest.approx(1 / 4)
