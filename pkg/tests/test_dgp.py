import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelinfer import _rng
from panelinfer.dgp import (Ar1PanelSpec, HdmaSpec, SpecError, bn_decompose, bn_partial_sums, draw_innovations,
                            edgeworth_beta3_star, innovation_kappa3, simulate_ar1_panel, simulate_hdma,
                            simulate_unit_root, spec_from_dict, sym_psd_sqrt, unit_root_limit, unit_root_moment)
from panelinfer.harness import prop3_spec

from oracles import ma_direct


@st.composite
def ma_specs(draw, max_n=6, max_l=5):
    n = draw(st.integers(1, max_n))
    L = draw(st.integers(0, max_l))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    coeffs = tuple(rng.standard_normal((n, n)) / (1 + ell) for ell in range(L + 1))
    return HdmaSpec(rng.standard_normal(n), coeffs), seed


@given(ma_specs(), st.integers(1, 50))
def test_bn_representations_match_oracle(spec_seed, T):
    spec, seed = spec_seed
    eps = np.random.default_rng(seed + 1).standard_normal((spec.order + 3 + T, spec.N))
    direct, rep_a, rep_b = bn_partial_sums(spec, eps, T)
    oracle = np.cumsum(ma_direct(spec.coeffs, eps, T), axis=0)
    np.testing.assert_allclose(direct, oracle, atol=1e-10, rtol=0)
    np.testing.assert_allclose(rep_a, oracle, atol=1e-10, rtol=0)
    np.testing.assert_allclose(rep_b, oracle, atol=1e-10, rtol=0)


def test_bn_tilde_identity():
    # B(L) = B - (1 - L) Btilde(L), coefficient by coefficient
    rng = np.random.default_rng(3)
    coeffs = tuple(rng.standard_normal((3, 3)) for _ in range(4))
    parts = bn_decompose(HdmaSpec(np.zeros(3), coeffs))
    L = 3
    rebuilt = [parts.b_sum - parts.tilde(0)] + [parts.tilde(ell - 1) - parts.tilde(ell) for ell in range(1, L + 1)]
    for got, want in zip(rebuilt, coeffs):
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_simulate_hdma_matches_direct_sum():
    spec = HdmaSpec(np.array([1.0, -2.0]), (np.eye(2), 0.5 * np.ones((2, 2))), burn_in=3)
    p, eps = simulate_hdma(spec, 20, seed=5, return_innovations=True)
    want = ma_direct(spec.coeffs, eps, 20) + spec.mu
    np.testing.assert_allclose(p.values, want.T, atol=1e-12)


def test_hdma_autocov_and_long_run():
    b0, b1 = np.array([[1.0, 0.2], [0.0, 1.0]]), np.array([[0.5, 0.0], [0.3, 0.1]])
    spec = HdmaSpec(np.zeros(2), (b0, b1))
    np.testing.assert_allclose(spec.autocov(0), b0 @ b0.T + b1 @ b1.T)
    np.testing.assert_allclose(spec.autocov(1), b1 @ b0.T)
    np.testing.assert_allclose(spec.autocov(2), 0.0)
    total = spec.autocov(0) + spec.autocov(1) + spec.autocov(1).T
    np.testing.assert_allclose(spec.long_run_cov(), total, atol=1e-12)


@pytest.mark.parametrize("law", ["gauss", "t8", "gamma22_centered"])
def test_innovations_standardized(law):
    e = draw_innovations(law, np.random.default_rng(1), (400_000,))
    assert abs(e.mean()) < 0.01
    assert e.var() == pytest.approx(1.0, abs=0.02)
    skew = np.mean(e ** 3)
    assert skew == pytest.approx(innovation_kappa3(law), abs=0.06)


def test_custom_sampler_and_unknown_law():
    spec = HdmaSpec(np.zeros(2), (np.eye(2),), innovation=lambda rng, shape: np.ones(shape))
    np.testing.assert_array_equal(simulate_hdma(spec, 4, 0).values, 1.0)
    with pytest.raises(SpecError):
        HdmaSpec(np.zeros(2), (np.eye(2),), innovation="cauchy")
    with pytest.raises(SpecError):
        spec.to_dict()


def test_shape_mismatch_named():
    with pytest.raises(SpecError, match="B_1"):
        HdmaSpec(np.zeros(2), (np.eye(2), np.eye(3)))


def test_ar1_stationary_covariance():
    spec = Ar1PanelSpec.toeplitz(np.array([0.0, 1.0, 2.0]), 0.5, 0.6)
    p = simulate_ar1_panel(spec, 60_000, seed=9)
    np.testing.assert_allclose(p.values.mean(axis=1), spec.mu / (1 - 0.5), atol=0.05)
    np.testing.assert_allclose(np.cov(p.values), spec.stationary_cov(), atol=0.05)


def test_ar1_reproducible_and_replicates_differ():
    spec = Ar1PanelSpec.toeplitz(np.zeros(4), 0.3, 0.5)
    a = simulate_ar1_panel(spec, 30, seed=1, replicate=2)
    b = simulate_ar1_panel(spec, 30, seed=1, replicate=2)
    c = simulate_ar1_panel(spec, 30, seed=1, replicate=3)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_substreams_independent_of_later_components():
    # drawing from one component never shifts another
    a = _rng.stream(7, 0, _rng.DGP).standard_normal(5)
    _rng.stream(7, 0, _rng.MULTIPLIER).standard_normal(100)
    b = _rng.stream(7, 0, _rng.DGP).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert _rng.derived_seed(7, 1, 5) != _rng.derived_seed(7, 2, 5)
    assert 0 <= _rng.derived_seed(7, 1, 5) < 2 ** 63


def test_indefinite_sigma_rejected():
    with pytest.raises(SpecError, match="positive semidefinite"):
        Ar1PanelSpec(np.zeros(2), 0.3, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SpecError):
        Ar1PanelSpec.toeplitz(np.zeros(2), 1.0, 0.5)


def test_sym_psd_sqrt_squares_back(rng):
    a = rng.standard_normal((5, 3))
    s = sym_psd_sqrt(a @ a.T)
    np.testing.assert_allclose(s @ s, a @ a.T, atol=1e-10)


def test_spec_dict_round_trip():
    for spec in (prop3_spec(4), Ar1PanelSpec.toeplitz(np.arange(3.0), 0.2, 0.4, "t8")):
        back = spec_from_dict(spec.to_dict())
        assert back.to_dict() == spec.to_dict()


def test_unit_root_limit_closed_form():
    # ||I + 0.5 {0.5^|i-j|}||_F^2 / (2N): diagonal 1.5^2, band k contributes 2(N-k)(0.25^(k+1))
    N = 200
    band = sum(2 * (N - k) * 0.25 ** (k + 1) for k in range(1, N))
    want = (N * 2.25 + band) / N / 2
    assert unit_root_limit(prop3_spec(N)) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(1.2078, abs=1e-4)


def test_unit_root_moment_small_case():
    y = simulate_unit_root(HdmaSpec.iid(1), 4, seed=0)
    assert unit_root_moment(y) == pytest.approx(np.sum(y.values ** 2) / 16)
    assert np.all(np.diff(y.values, axis=1).shape == (1, 3))


def test_edgeworth_term_hand_value():
    # B = I_2, L_N = 2: sigma_x^2 = 1, kappa3 = sqrt(2), sum (1'b_j)^3 = 2
    spec = HdmaSpec.iid(2, "gamma22_centered")
    want = math.sqrt(2) / (1.0 * 2 ** 1.5 * 10.0) * 2
    assert edgeworth_beta3_star(spec, 100, 2.0) == pytest.approx(want, rel=1e-12)
    assert edgeworth_beta3_star(HdmaSpec.iid(2), 100, 2.0) == 0.0
    with pytest.raises(SpecError):
        edgeworth_beta3_star(spec, 100, 0.0)
