import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelinfer.longrun import (BandwidthError, KernelSpec, asymptotic_mse, default_bandwidth, hac_matrix,
                                hac_matrix_from_array, hac_matrix_unbalanced, hac_scalar, kernel_eval, kernel_l2,
                                mse_optimal_bandwidth, optimal_bandwidth, psd_sqrt, quadratic_form)
from panelinfer.panel import Panel, PanelError

from oracles import hac_loop

FAMILIES = ["bartlett", "parzen", "tukey_hanning", "qs_truncated", "trapezoid"]


@pytest.mark.parametrize("family,x,want", [
    ("bartlett", 0.5, 0.5), ("bartlett", 1.2, 0.0),
    ("parzen", 0.25, 1 - 6 / 16 + 6 / 64), ("parzen", 0.75, 2 * 0.25 ** 3),
    ("tukey_hanning", 0.5, 0.5), ("trapezoid", 0.75, 0.5), ("trapezoid", 0.3, 1.0),
    ("qs_truncated", 0.0, 1.0),
])
def test_kernel_values(family, x, want):
    k = KernelSpec(family, 5)
    assert kernel_eval(k, x) == pytest.approx(want, abs=1e-14)
    assert kernel_eval(k, -x) == kernel_eval(k, x)


def test_qs_matches_textbook_form():
    x = 0.37
    z = 6 * math.pi * x / 5
    want = 25 / (12 * math.pi ** 2 * x ** 2) * (math.sin(z) / z - math.cos(z))
    assert kernel_eval(KernelSpec("qs", 3), x) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("family,want", [
    ("bartlett", 2 / 3), ("parzen", 151 / 280), ("tukey_hanning", 3 / 4), ("trapezoid", 4 / 3),
])
def test_kernel_l2(family, want):
    assert kernel_l2(family) == pytest.approx(want, rel=1e-10)


def test_bandwidth_rules():
    assert default_bandwidth(200) == 10
    assert default_bandwidth(100) == 8
    assert default_bandwidth(1000) == 17
    # (1 / (2 * 2/3))^(2/3) * 1000^(1/3) = 8.25
    assert optimal_bandwidth(KernelSpec("bartlett"), 1.0, 1.0, 1000) == 8
    with pytest.raises(ValueError):
        optimal_bandwidth(KernelSpec("trapezoid"), 1.0, 1.0, 1000)


def test_mse_minimiser_is_stationary_point():
    k = KernelSpec("parzen")
    m = mse_optimal_bandwidth(k, 2.0, 3.0, 500)
    f = lambda v: asymptotic_mse(k, 2.0, 3.0, 500, v)  # noqa: E731
    assert f(m) < f(m * 0.99) and f(m) < f(m * 1.01)


def test_kernel_spec_validation():
    with pytest.raises(BandwidthError):
        KernelSpec("bartlett", 0)
    with pytest.raises(ValueError):
        KernelSpec("epanechnikov", 3)
    assert KernelSpec("tukey-hanning", 2).family == "tukey_hanning"


@given(st.integers(1, 4), st.integers(4, 30), st.integers(1, 6), st.sampled_from(FAMILIES),
       st.booleans(), st.integers(0, 10 ** 6))
def test_hac_matches_quadruple_loop(N, T, m, family, demean, seed):
    m = min(m, T - 1)
    x = np.random.default_rng(seed).standard_normal((N, T))
    k = KernelSpec(family, m)
    got = hac_matrix_from_array(x, k, demean).omega
    want = hac_loop(x, lambda u: kernel_eval(k, u), m, demean)
    np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)


def test_hac_scalar_and_quadratic_form_agree(rng):
    x = rng.standard_normal(40)
    k = KernelSpec("parzen", 6)
    want = hac_loop(x[None, :], lambda u: kernel_eval(k, u), 6)[0, 0]
    assert hac_scalar(x, k) == pytest.approx(want, abs=1e-12)
    assert quadratic_form(x - x.mean(), k) / 40 == pytest.approx(want, abs=1e-12)


def test_unbalanced_estimator_equals_balanced_when_complete(rng):
    p = Panel.from_array(rng.standard_normal((3, 25)))
    k = KernelSpec("bartlett", 4)
    np.testing.assert_allclose(hac_matrix_unbalanced(p, k).omega, hac_matrix(p, k).omega, atol=1e-14)


def test_unbalanced_pairs_use_observed_periods(rng):
    x = rng.standard_normal((2, 20))
    mask = np.ones_like(x, dtype=bool)
    mask[0, 15:] = False
    p = Panel.from_array(x, mask)
    k = KernelSpec("bartlett", 3)
    got = hac_matrix_unbalanced(p, k).omega
    xc = np.where(mask, x - np.array([x[0, :15].mean(), x[1].mean()])[:, None], 0.0)
    raw = hac_loop(xc, lambda u: kernel_eval(k, u), 3, demean=False) * 20
    np.testing.assert_allclose(got, raw / np.sqrt(np.outer([15, 20], [15, 20])), atol=1e-12)
    with pytest.raises(PanelError):
        hac_matrix(p, k)


def test_bandwidth_must_be_below_length(rng):
    with pytest.raises(BandwidthError):
        hac_matrix_from_array(rng.standard_normal((2, 5)), KernelSpec("bartlett", 5))
    short = np.ones((2, 10), dtype=bool)
    short[1, 3:] = False
    with pytest.raises(BandwidthError, match="'b'"):
        hac_matrix_unbalanced(Panel.from_array(rng.standard_normal((2, 10)), short, unit_ids=("a", "b")),
                              KernelSpec("bartlett", 4))


def test_ma1_long_run_variance_large_sample():
    theta = 0.5
    e = np.random.default_rng(11).standard_normal(100_001)
    x = e[1:] + theta * e[:-1]
    est = hac_scalar(x, KernelSpec("bartlett", default_bandwidth(x.size)))
    assert abs(est / (1 + theta) ** 2 - 1) < 0.10


def test_psd_sqrt_clips_negative_eigenvalues():
    m = np.array([[1.0, 2.0], [2.0, 1.0]])
    s = psd_sqrt(m)
    w, v = np.linalg.eigh(m)
    np.testing.assert_allclose(s @ s, (v * np.clip(w, 0, None)) @ v.T, atol=1e-12)
    with pytest.raises(ValueError):
        psd_sqrt(np.array([[1.0, 0.0], [1.0, 1.0]]))
