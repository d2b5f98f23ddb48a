"""Max-type homogeneity tests and bootstrap confidence intervals for means."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .bootstrap import (DEFAULT_LEVELS, DEFAULT_REPS, BootstrapDraws, MultiplierSpec, _gaussian_vectors,
                        _make_draws,
                        bootstrap_heterogeneous, bootstrap_homogeneous, draw_multiplier_matrix)
from .longrun import (KernelSpec, LongRunMatrix, default_kernel, hac_matrix_from_array,
                      hac_matrix_unbalanced_from_array, psd_sqrt)
from .panel import SCHEMA_VERSION, Panel, PanelError


class StageError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage label."""


@dataclass
class TestReport:
    statistic: float
    draws: BootstrapDraws
    p_value: float
    decisions: dict
    config: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def critical_value(self, level: float) -> float:
        return self.draws.level_quantiles[float(level)]

    def to_dict(self, include_draws: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "critical_values": {f"{k:g}": v for k, v in self.draws.level_quantiles.items()},
            "reject": {f"{k:g}": v for k, v in self.decisions.items()},
            "config": self.config,
        }
        if include_draws:
            out["draws"] = self.draws.draws.tolist()
        return out


class CompetitorStatistic(Protocol):
    """External statistic plugged into the Monte Carlo harness for comparison.

    Returns (statistic, reject at the harness's nominal level).
    """

    name: str

    def __call__(self, p: Panel, level: float) -> tuple[float, bool]: ...


def _stage(label: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001 - relabelled and re-raised
        raise StageError(f"[{label}] {exc}") from exc


def _report(statistic: float, draws: BootstrapDraws, config: dict) -> TestReport:
    decisions = {lv: bool(statistic > q) for lv, q in draws.level_quantiles.items()}
    return TestReport(float(statistic), draws, draws.p_value(statistic), decisions, config)


def max_test(components: np.ndarray, scores: np.ndarray, k: KernelSpec, R: int, levels: Sequence[float],
             seed: int, mask: np.ndarray | None = None, two_sided: bool = True,
             config: dict | None = None, demean: bool = True, labels: Sequence[str] | None = None) -> TestReport:
    """Compare max_i |components_i| with |Omega^{1/2} g|_inf.

    ``scores`` is the N x T panel whose long-run covariance approximates that
    of the components.  With ``mask`` the unbalanced estimator is used;
    ``demean`` removes each unit's time average inside the HAC estimator.
    With ``labels`` the Gaussian vector is indexed by sorted label rather than
    by row, so relabelling the units reproduces the draws exactly.
    """
    comp = np.asarray(components, dtype=float)
    if mask is None or mask.all():
        lr = _stage("hac", hac_matrix_from_array, scores, k, demean)
    else:
        lr = _stage("hac", hac_matrix_unbalanced_from_array, scores, mask, k, None, demean)
    root = _stage("psd_sqrt", psd_sqrt, lr)
    g = _stage("multiplier", _gaussian_vectors, comp.shape[0], R, seed)
    if labels is not None:
        g = g[:, np.argsort(np.argsort(np.asarray(labels, dtype=str), kind="stable"), kind="stable")]
    proj = g @ root.T
    if two_sided:
        stat = float(np.max(np.abs(comp)))
        draws = np.abs(proj).max(axis=1)
    else:
        stat = float(np.max(comp))
        draws = proj.max(axis=1)
    cfg = {"kernel": k.family, "bandwidth": k.bandwidth, "R": R, "seed": seed,
           "two_sided": two_sided, "demeaned": demean, "levels": [float(v) for v in levels]}
    cfg.update(config or {})
    return _report(stat, _make_draws(draws, levels), cfg)


# ----------------------------------------------------------------------------
# Q_NT


def _deviations(p: Panel) -> np.ndarray:
    """sqrt(T_i) (xbar_i - xbar) with xbar the average of unit means."""
    means = p.unit_means()
    return np.sqrt(p.t_counts) * (means - means.mean())


def q_statistic(p: Panel, two_sided: bool = True) -> float:
    """max_i |sqrt(T_i)(xbar_i - xbar)|; signed maximum when ``two_sided`` is False."""
    if p.N < 2:
        raise PanelError("the homogeneity statistic needs at least two units")
    dev = _deviations(p)
    return float(np.max(np.abs(dev)) if two_sided else np.max(dev))


def homogeneity_scores(p: Panel, center: str = "cross_section") -> np.ndarray:
    """N x T panel whose long-run covariance feeds the multiplier step.

    ``"cross_section"`` subtracts the period average over observed units, which
    is the series behind sqrt(T)(xbar_i - xbar).  ``"unit"`` keeps the raw unit
    series (each is demeaned over time inside the HAC estimator either way).
    """
    if center == "unit":
        return p.filled()
    if center != "cross_section":
        raise ValueError(f"center must be 'cross_section' or 'unit', got {center!r}")
    x = p.filled()
    per_t = p.mask.sum(axis=0)
    avg = np.divide(x.sum(axis=0), per_t, out=np.zeros(p.T), where=per_t > 0)
    return np.where(p.mask, x - avg, 0.0)


def test_homogeneity(p: Panel, k: KernelSpec | None = None, R: int = DEFAULT_REPS,
                     levels: Sequence[float] = DEFAULT_LEVELS, seed: int = 0,
                     two_sided: bool = True, center: str = "cross_section") -> TestReport:
    """H0: all unit means equal, against any unit deviating.

    Critical values come from the Gaussian multiplier bootstrap on the HAC
    long-run covariance (bartlett, bandwidth floor(1.75 T^{1/3}) by default)
    of the scores chosen by ``center``; see ``homogeneity_scores``.
    """
    if p.N < 2:
        raise StageError("[statistic] the homogeneity statistic needs at least two units")
    k = k or default_kernel(p.T)
    dev = _deviations(p)
    scores = _stage("scores", homogeneity_scores, p, center)
    mask = None if p.is_balanced else p.mask
    return max_test(dev, scores, k, R, levels, seed, mask, two_sided,
                    {"test": "homogeneity", "N": p.N, "T": p.T, "balanced": p.is_balanced,
                     "center": center}, labels=p.unit_ids)


test_homogeneity.__test__ = False


# ----------------------------------------------------------------------------
# confidence intervals


@dataclass(frozen=True)
class MeanInterval:
    unit: str
    mean: float
    lower: float
    upper: float
    degenerate: bool = False


def _interval(mean: float, draws: BootstrapDraws, count: int, level: float) -> tuple[float, float]:
    if draws.degenerate:
        return mean, mean
    lo, hi = draws.interval(level)
    # draws approximate sum(x - mu) / scale, so mu = mean - stat * scale / count
    return mean - hi * draws.scale / count, mean - lo * draws.scale / count


def infer_unit_means(p: Panel, spec: MultiplierSpec | None = None, R: int = DEFAULT_REPS,
                     level: float = 0.95, seed: int = 0) -> list[MeanInterval]:
    """Equal-tailed bootstrap interval for each unit mean.

    All units share the same multiplier draws, as the procedure prescribes.
    """
    spec = spec or MultiplierSpec.default(p.T)
    zeta = draw_multiplier_matrix(spec, R, seed)
    means = p.unit_means()
    out = []
    for i in range(p.N):
        d = bootstrap_heterogeneous(p, i, means[i], spec, R, seed, (level,), zeta=zeta)
        lo, hi = _interval(float(means[i]), d, int(p.t_counts[i]), level)
        out.append(MeanInterval(p.unit_ids[i], float(means[i]), lo, hi, d.degenerate))
    return out


def infer_common_mean(p: Panel, spec: MultiplierSpec | None = None, R: int = DEFAULT_REPS,
                      level: float = 0.95, seed: int = 0) -> MeanInterval:
    """Interval for the common mean under homogeneity, any dependence strength."""
    spec = spec or MultiplierSpec.default(p.T)
    grand = float(p.require_balanced("infer_common_mean").mean())
    d = bootstrap_homogeneous(p, grand, spec, R, seed, (level,))
    lo, hi = _interval(grand, d, p.N * p.T, level)
    return MeanInterval("all", grand, lo, hi, d.degenerate)


@dataclass(frozen=True)
class MeanTest:
    """Self-normalised test of a hypothesised mean against equal-tailed bootstrap quantiles."""

    unit: str
    mu0: float
    statistic: float
    lower: float
    upper: float
    reject: bool

    __test__ = False


def _mean_test(unit: str, mu0: float, total: float, d: BootstrapDraws, level: float) -> MeanTest:
    if d.degenerate:
        return MeanTest(unit, mu0, 0.0, 0.0, 0.0, bool(total != 0.0))
    stat = total / d.scale
    lo, hi = d.interval(level)
    return MeanTest(unit, mu0, float(stat), lo, hi, not lo <= stat <= hi)


def test_common_mean(p: Panel, mu0: float, spec: MultiplierSpec | None = None, R: int = DEFAULT_REPS,
                     level: float = 0.95, seed: int = 0) -> MeanTest:
    """H0: every unit has mean ``mu0``.

    The statistic sum_it (x_it - mu0) and its bootstrap draws are both divided
    by sqrt(s'As) with s_t = sum_i (x_it - mu0), so the null value enters the
    normaliser and nothing is demeaned.
    """
    spec = spec or MultiplierSpec.default(p.T)
    x = p.require_balanced("test_common_mean")
    d = bootstrap_homogeneous(p, mu0, spec, R, seed, (level,))
    return _mean_test("all", float(mu0), float((x - mu0).sum()), d, level)


def test_unit_means(p: Panel, mu0, spec: MultiplierSpec | None = None, R: int = DEFAULT_REPS,
                    level: float = 0.95, seed: int = 0) -> list[MeanTest]:
    """H0_i: unit i has mean ``mu0[i]`` (scalar broadcasts), one test per unit with shared multipliers."""
    spec = spec or MultiplierSpec.default(p.T)
    mu = np.broadcast_to(np.asarray(mu0, dtype=float), (p.N,))
    zeta = draw_multiplier_matrix(spec, R, seed)
    out = []
    for i in range(p.N):
        d = bootstrap_heterogeneous(p, i, mu[i], spec, R, seed, (level,), zeta=zeta)
        total = float(np.sum(p.values[i, p.mask[i]] - mu[i]))
        out.append(_mean_test(p.unit_ids[i], float(mu[i]), total, d, level))
    return out


test_common_mean.__test__ = False
test_unit_means.__test__ = False


# ----------------------------------------------------------------------------
# regression coefficients on common regressors


def _partial_out(x: np.ndarray, j: int) -> np.ndarray:
    others = np.delete(x, j, axis=1)
    if others.shape[1] == 0:
        return x[:, j].copy()
    coef, *_ = np.linalg.lstsq(others, x[:, j], rcond=None)
    return x[:, j] - others @ coef


def _regression_parts(y: Panel, x: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit components, score panel and unit coefficients, each unit on its observed periods.

    Unit i uses xt_ij, regressor j partialled out on the other regressors over
    the periods unit i is observed.  The component is
    (1/sqrt(T_i)) xt_ij'xt_ij (b_ij - bbar_j); the score at t is xt_ijt times
    the unit's OLS residual net of the average residual over units observed at t.
    """
    N, T = y.N, y.T
    K = x.shape[1]
    coefs = np.empty((N, K))
    resid = np.zeros((N, T))
    xt = np.zeros((N, T))
    for i in range(N):
        obs = y.mask[i]
        xi = x[obs]
        if np.linalg.matrix_rank(xi) < K:
            raise PanelError(f"regressors are rank deficient over the periods of unit {y.unit_ids[i]!r}")
        coefs[i], *_ = np.linalg.lstsq(xi, y.values[i, obs], rcond=None)
        resid[i, obs] = y.values[i, obs] - xi @ coefs[i]
        xt[i, obs] = _partial_out(xi, j)
    counts = y.t_counts
    gram = np.einsum("it,it->i", xt, xt)
    comp = gram * (coefs[:, j] - coefs[:, j].mean()) / np.sqrt(counts)
    per_t = y.mask.sum(axis=0)
    avg = np.divide(resid.sum(axis=0), per_t, out=np.zeros(T), where=per_t > 0)
    scores = np.where(y.mask, (resid - avg) * xt, 0.0)
    return comp, scores, coefs


def test_regression_heterogeneity(y: Panel, x_common, coef_index: int, k: KernelSpec | None = None,
                                  R: int = DEFAULT_REPS, levels: Sequence[float] = DEFAULT_LEVELS,
                                  seed: int = 0) -> TestReport:
    """H0: coefficient ``coef_index`` is equal across units in y_it = x_t' beta_i + e_it.

    With xt_j the part of regressor j orthogonal to the other regressors, the
    unit component is (1/sqrt(T)) xt_j'(y_i - ybar) = sqrt(T) (xt_j'xt_j / T)(b_ij - bbar_j),
    and the score panel is xt_jt times the unit OLS residual net of its
    cross-sectional average.  With a single constant regressor this is exactly
    ``test_homogeneity``.  Unbalanced panels fit each unit on its own periods.
    """
    x = np.asarray(x_common, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T, K = x.shape
    if T != y.T:
        raise PanelError(f"regressors have {T} rows, panel has T = {y.T}")
    if not 0 <= coef_index < K:
        raise PanelError(f"coef_index {coef_index} out of range for {K} regressors")
    if np.linalg.matrix_rank(x) < K:
        raise PanelError("common regressor matrix is rank deficient")
    k = k or default_kernel(T)
    if int(y.t_counts.min()) <= K + k.bandwidth:
        raise PanelError(f"every unit needs more than K + bandwidth = {K + k.bandwidth} periods")
    if y.is_balanced:
        yv = y.values
        xt = _partial_out(x, coef_index)
        coefs, *_ = np.linalg.lstsq(x, yv.T, rcond=None)           # K x N
        resid = yv - (x @ coefs).T
        comp = (yv - yv.mean(axis=0)) @ xt / np.sqrt(T)
        scores = (resid - resid.mean(axis=0)) * xt[None, :]
        unit_coefs = coefs[coef_index]
        mask = None
    else:
        comp, scores, coefs = _regression_parts(y, x, coef_index)
        unit_coefs = coefs[:, coef_index]
        mask = y.mask
    rep = max_test(comp, scores, k, R, levels, seed, mask, config={
        "test": "regression_heterogeneity", "coef_index": coef_index, "K": K, "N": y.N, "T": T,
        "balanced": y.is_balanced}, labels=y.unit_ids)
    rep.config["unit_coefficients"] = unit_coefs.tolist()
    return rep


test_regression_heterogeneity.__test__ = False
