"""Dependent wild bootstrap and Gaussian multiplier bootstrap engines.

A single m-dependent Gaussian series zeta_t multiplies every unit at period t,
so the bootstrap keeps whatever cross-sectional dependence the data have.
The multiplier covariance is exactly a((t - s)/m), obtained from a banded
Cholesky factor of the T x T Toeplitz matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import linalg

from . import _rng
from .longrun import KernelSpec, default_kernel, quadratic_form
from .panel import Panel, PanelError

DEFAULT_REPS = 399
DEFAULT_LEVELS = (0.90, 0.95, 0.99)


class MultiplierError(ValueError):
    """Multiplier covariance cannot be realised."""


@dataclass(frozen=True)
class MultiplierSpec:
    kernel: KernelSpec
    T: int

    def __post_init__(self) -> None:
        if self.kernel.bandwidth >= self.T:
            raise MultiplierError(f"bandwidth {self.kernel.bandwidth} must be below T = {self.T}")

    @classmethod
    def default(cls, T: int, family: str = "bartlett") -> "MultiplierSpec":
        return cls(default_kernel(T, family), T)


@dataclass(frozen=True)
class BootstrapDraws:
    draws: np.ndarray
    level_quantiles: dict = field(default_factory=dict)
    degenerate: bool = False
    scale: float = 1.0

    @property
    def R(self) -> int:
        return self.draws.shape[0]

    def quantile(self, level: float) -> float:
        return float(np.quantile(self.draws, level))

    def interval(self, level: float = 0.95) -> tuple[float, float]:
        """Equal-tailed interval covering ``level`` of the draws."""
        a = (1.0 - level) / 2.0
        return float(np.quantile(self.draws, a)), float(np.quantile(self.draws, 1.0 - a))

    def p_value(self, statistic: float) -> float:
        """(1 + #{draws >= statistic}) / (R + 1)."""
        return float((1 + np.count_nonzero(self.draws >= statistic)) / (self.R + 1))


def _make_draws(draws: np.ndarray, levels: Sequence[float], degenerate: bool = False,
                scale: float = 1.0) -> BootstrapDraws:
    draws = np.asarray(draws, dtype=float)
    q = {float(lv): float(np.quantile(draws, lv)) for lv in sorted(levels)}
    return BootstrapDraws(draws, q, degenerate, scale)


# ----------------------------------------------------------------------------
# multipliers


def _band(k: KernelSpec) -> int:
    w = k.weights()
    nz = np.flatnonzero(w != 0.0)
    return int(nz.max())


@lru_cache(maxsize=32)
def _banded_factor(family: str, m: int, T: int) -> np.ndarray:
    k = KernelSpec(family, m)
    u = min(_band(k), T - 1)
    w = k.weights()[:u + 1]
    ab = np.repeat(w[:, None], T, axis=1)
    try:
        fac = linalg.cholesky_banded(ab, lower=True)
    except linalg.LinAlgError:
        raise MultiplierError(
            f"the {family} kernel with bandwidth {m} gives an indefinite {T} x {T} multiplier "
            "covariance; use bartlett or parzen") from None
    fac.setflags(write=False)
    return fac


def _apply_factor(fac: np.ndarray, g: np.ndarray) -> np.ndarray:
    """L @ g along the last axis, with L lower banded (row d holds diagonal -d)."""
    T = g.shape[-1]
    out = fac[0] * g
    for d in range(1, fac.shape[0]):
        out[..., d:] += fac[d, :T - d] * g[..., :T - d]
    return out


def multiplier_factor(spec: MultiplierSpec) -> np.ndarray:
    return _banded_factor(spec.kernel.family, spec.kernel.bandwidth, spec.T)


def draw_multipliers(spec: MultiplierSpec, seed: int, replicate: int = 0) -> np.ndarray:
    """One Gaussian series with E[zeta_t zeta_s] = a((t-s)/m)."""
    g = _rng.stream(seed, replicate, _rng.MULTIPLIER).standard_normal(spec.T)
    return _apply_factor(multiplier_factor(spec), g)


def draw_multiplier_matrix(spec: MultiplierSpec, R: int, seed: int) -> np.ndarray:
    """R x T multipliers; row r is ``draw_multipliers(spec, seed, r)``."""
    fac = multiplier_factor(spec)
    g = np.empty((R, spec.T))
    for r in range(R):
        g[r] = _rng.stream(seed, r, _rng.MULTIPLIER).standard_normal(spec.T)
    return _apply_factor(fac, g)


# ----------------------------------------------------------------------------
# dependent wild bootstrap


def _studentized(series: np.ndarray, zeta: np.ndarray, spec: MultiplierSpec,
                 studentize: bool) -> tuple[np.ndarray, float, bool]:
    """Draws sum_t s_t zeta_t over rows of ``zeta``, divided by sqrt(s^T A s)."""
    num = zeta @ series
    var = float(quadratic_form(series, spec.kernel))
    scale_ref = float(np.sum(series ** 2))
    if var <= 1e-24 * max(1.0, scale_ref) or scale_ref == 0.0:
        return np.zeros(zeta.shape[0]), 0.0, True
    scale = np.sqrt(var) if studentize else np.sqrt(spec.T)
    return num / scale, float(np.sqrt(var)), False


def bootstrap_homogeneous(p: Panel, mu_hat: float | None, spec: MultiplierSpec, R: int = DEFAULT_REPS,
                          seed: int = 0, levels: Sequence[float] = DEFAULT_LEVELS,
                          studentize: bool = True, zeta: np.ndarray | None = None) -> BootstrapDraws:
    """Bootstrap law of the self-normalised grand sum.

    Each draw is sum_t (sum_i (x_it - mu_hat)) zeta_t divided by the square
    root of its multiplier variance, so no dependence-strength normaliser is
    needed.  ``scale`` on the result carries that square root; with
    ``studentize=False`` draws are divided by sqrt(T) instead.
    """
    x = p.require_balanced("bootstrap_homogeneous")
    if spec.T != p.T:
        raise PanelError(f"multiplier length {spec.T} does not match T = {p.T}")
    mu = float(x.mean()) if mu_hat is None else float(mu_hat)
    s = (x - mu).sum(axis=0)
    if zeta is None:
        zeta = draw_multiplier_matrix(spec, R, seed)
    draws, scale, degenerate = _studentized(s, zeta, spec, studentize)
    return _make_draws(draws, levels, degenerate, scale)


def bootstrap_heterogeneous(p: Panel, i: int, mu_i_hat: float | None, spec: MultiplierSpec,
                            R: int = DEFAULT_REPS, seed: int = 0,
                            levels: Sequence[float] = DEFAULT_LEVELS, studentize: bool = True,
                            zeta: np.ndarray | None = None) -> BootstrapDraws:
    """Per-unit version: draws of sum_t (x_it - mu_i_hat) zeta_t, self-normalised.

    For an unbalanced unit the sum runs over its observed periods only.
    """
    obs = p.mask[i]
    row = p.values[i]
    mu = float(row[obs].mean()) if mu_i_hat is None else float(mu_i_hat)
    s = np.where(obs, row - mu, 0.0)
    if spec.T != p.T:
        raise PanelError(f"multiplier length {spec.T} does not match T = {p.T}")
    if zeta is None:
        zeta = draw_multiplier_matrix(spec, R, seed)
    draws, scale, degenerate = _studentized(s, zeta, spec, studentize)
    return _make_draws(draws, levels, degenerate, scale)


# ----------------------------------------------------------------------------
# Gaussian multiplier bootstrap for max statistics


def _gaussian_vectors(N: int, R: int, seed: int) -> np.ndarray:
    g = np.empty((R, N))
    for r in range(R):
        g[r] = _rng.stream(seed, r, _rng.GAUSSIAN).standard_normal(N)
    return g


def gaussian_multiplier_max(omega_sqrt, T: int, R: int = DEFAULT_REPS, seed: int = 0,
                            levels: Sequence[float] = DEFAULT_LEVELS, exact: bool = False) -> BootstrapDraws:
    """Draws of |S (1/sqrt(T)) sum_t z_t|_inf with z_t i.i.d. N(0, I_N).

    The time average of T standard normal vectors is itself N(0, I_N), so by
    default one vector per draw is used.  ``exact=True`` sums T vectors
    instead (same law, T times the work).
    """
    s = np.atleast_2d(np.asarray(omega_sqrt, dtype=float))
    N = s.shape[0]
    if s.shape != (N, N):
        raise ValueError("omega_sqrt must be square")
    if exact:
        g = np.empty((R, N))
        for r in range(R):
            z = _rng.stream(seed, r, _rng.GAUSSIAN).standard_normal((T, N))
            g[r] = z.sum(axis=0) / np.sqrt(T)
    else:
        g = _gaussian_vectors(N, R, seed)
    draws = np.abs(g @ s.T).max(axis=1)
    return _make_draws(draws, levels)


def gaussian_multiplier_max_unbalanced(omega_sqrt, t_counts, R: int = DEFAULT_REPS, seed: int = 0,
                                       levels: Sequence[float] = DEFAULT_LEVELS,
                                       exact: bool = False) -> BootstrapDraws:
    """Unit i's Gaussian sum runs over its own T_i periods.

    Each standardised sum is N(0, 1) whatever T_i is, so the default path is
    the balanced one; ``exact=True`` draws the T_i variates explicitly.
    """
    counts = np.asarray(t_counts, dtype=int)
    if np.any(counts < 1):
        raise ValueError("every unit needs at least one period")
    s = np.atleast_2d(np.asarray(omega_sqrt, dtype=float))
    N = s.shape[0]
    if counts.shape != (N,):
        raise ValueError("t_counts must have one entry per unit")
    if not exact:
        return gaussian_multiplier_max(s, int(counts.max()), R, seed, levels)
    g = np.empty((R, N))
    for r in range(R):
        rng = _rng.stream(seed, r, _rng.GAUSSIAN)
        g[r] = [rng.standard_normal(c).sum() / np.sqrt(c) for c in counts]
    draws = np.abs(g @ s.T).max(axis=1)
    return _make_draws(draws, levels)
