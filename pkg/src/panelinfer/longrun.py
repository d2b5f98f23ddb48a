"""Kernels, HAC long-run covariance estimators and bandwidth rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .panel import Panel, PanelError

FAMILIES = ("bartlett", "parzen", "tukey_hanning", "qs_truncated", "trapezoid")

# CLI spellings
KERNEL_ALIASES = {
    "bartlett": "bartlett",
    "parzen": "parzen",
    "tukey-hanning": "tukey_hanning",
    "tukey_hanning": "tukey_hanning",
    "qs": "qs_truncated",
    "qs_truncated": "qs_truncated",
    "trapezoid": "trapezoid",
}

# (q_a, C_{q_a}) with 1 - a(x) ~ C |x|^q near 0.  The flat-top trapezoid is
# identically 1 near the origin, so its constant is 0 at every order.
_CHAR = {
    "bartlett": (1, 1.0),
    "parzen": (2, 6.0),
    "tukey_hanning": (2, math.pi ** 2 / 4),
    "qs_truncated": (2, 18 * math.pi ** 2 / 125),
    "trapezoid": (2, 0.0),
}


class BandwidthError(ValueError):
    """Bandwidth incompatible with the sample length."""


def _qs(x: np.ndarray) -> np.ndarray:
    z = 6 * np.pi * x / 5
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 25 / (12 * np.pi ** 2 * x ** 2) * (np.sin(z) / z - np.cos(z))
    return np.where(x == 0, 1.0, out)


def _eval(family: str, x: np.ndarray) -> np.ndarray:
    ax = np.abs(np.asarray(x, dtype=float))
    if family == "bartlett":
        out = 1.0 - ax
    elif family == "parzen":
        out = np.where(ax <= 0.5, 1 - 6 * ax ** 2 + 6 * ax ** 3, 2 * (1 - ax) ** 3)
    elif family == "tukey_hanning":
        out = (1 + np.cos(np.pi * ax)) / 2
    elif family == "qs_truncated":
        out = _qs(ax)
    elif family == "trapezoid":
        out = np.where(ax <= 0.5, 1.0, 2 * (1 - ax))
    else:
        raise ValueError(f"unknown kernel family {family!r}")
    return np.where(ax <= 1.0, out, 0.0)


@lru_cache(maxsize=None)
def kernel_l2(family: str) -> float:
    """Integral of a(u)^2 over [-1, 1]."""
    val, _ = integrate.quad(lambda u: float(_eval(family, u)) ** 2, -1.0, 1.0,
                            points=[-0.5, 0.0, 0.5], epsabs=1e-13, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class KernelSpec:
    family: str = "bartlett"
    bandwidth: int = 1
    q_a: int = field(init=False)
    c_qa: float = field(init=False)

    def __post_init__(self) -> None:
        fam = KERNEL_ALIASES.get(self.family)
        if fam is None:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {sorted(KERNEL_ALIASES)}")
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1:
            raise BandwidthError(f"bandwidth must be a positive integer, got {self.bandwidth!r}")
        q, c = _CHAR[fam]
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "bandwidth", int(self.bandwidth))
        object.__setattr__(self, "q_a", q)
        object.__setattr__(self, "c_qa", c)

    def __call__(self, x):
        return kernel_eval(self, x)

    def weights(self) -> np.ndarray:
        """a(k/m) for k = 0..m."""
        return _eval(self.family, np.arange(self.bandwidth + 1) / self.bandwidth)

    def with_bandwidth(self, m: int) -> "KernelSpec":
        return KernelSpec(self.family, m)

    def to_dict(self) -> dict:
        return {"family": self.family, "bandwidth": self.bandwidth, "q_a": self.q_a, "c_qa": self.c_qa}


def kernel_eval(k: KernelSpec, x):
    """a(x); zero outside [-1, 1].  Scalars in, float out."""
    out = _eval(k.family, x)
    return float(out) if np.ndim(out) == 0 else out


def default_bandwidth(T: int) -> int:
    """floor(1.75 T^{1/3})."""
    return max(1, math.floor(1.75 * T ** (1.0 / 3.0) + 1e-12))


def default_kernel(T: int, family: str = "bartlett") -> KernelSpec:
    return KernelSpec(family, default_bandwidth(T))


def optimal_bandwidth(k: KernelSpec, sigma4: float, delta_qa: float, T: int) -> int:
    """Rounded (C Delta / (2 sigma^4 int a^2))^{2/(2q+1)} T^{1/(2q+1)}, at least 1."""
    if sigma4 <= 0:
        raise ValueError("sigma4 must be positive")
    if T < 2:
        raise ValueError("T must be at least 2")
    if k.c_qa == 0.0:
        raise ValueError(f"{k.family} has no finite-order bias constant; the rule does not apply")
    q = k.q_a
    base = k.c_qa * abs(delta_qa) / (2.0 * sigma4 * kernel_l2(k.family))
    m = base ** (2.0 / (2 * q + 1)) * T ** (1.0 / (2 * q + 1))
    return max(1, int(round(m)))


def mse_optimal_bandwidth(k: KernelSpec, sigma4: float, delta_qa: float, T: int) -> float:
    """Unrounded minimiser of (2m/T) int a^2 + C^2 Delta^2 / (sigma^4 m^{2q}).

    Setting the derivative to zero gives
    m = (q C^2 Delta^2 / (sigma^4 int a^2))^{1/(2q+1)} T^{1/(2q+1)}.
    """
    if sigma4 <= 0:
        raise ValueError("sigma4 must be positive")
    q = k.q_a
    base = q * k.c_qa ** 2 * delta_qa ** 2 / (sigma4 * kernel_l2(k.family))
    return base ** (1.0 / (2 * q + 1)) * T ** (1.0 / (2 * q + 1))


def asymptotic_mse(k: KernelSpec, sigma4: float, delta_qa: float, T: int, m: float) -> float:
    return 2 * m / T * kernel_l2(k.family) + k.c_qa ** 2 * delta_qa ** 2 / (sigma4 * m ** (2 * k.q_a))


# ----------------------------------------------------------------------------
# HAC estimators


def _check_bw(k: KernelSpec, T: int, who: str = "series") -> None:
    if k.bandwidth >= T:
        raise BandwidthError(f"bandwidth {k.bandwidth} must be smaller than the {who} length {T}")


def autocovariances(x: np.ndarray, max_lag: int) -> np.ndarray:
    """sum_t x_{t+k} x_t for k = 0..max_lag (no demeaning, no 1/T)."""
    x = np.asarray(x, dtype=float)
    T = x.shape[-1]
    return np.array([x[k:] @ x[:T - k] for k in range(max_lag + 1)])


def hac_scalar(series, k: KernelSpec, demean: bool = True) -> float:
    """(1/T) sum_{t,s} a((t-s)/m) (x_t - xbar)(x_s - xbar)."""
    x = np.asarray(series, dtype=float).ravel()
    T = x.shape[0]
    _check_bw(k, T)
    if demean:
        x = x - x.mean()
    w = k.weights()
    g = autocovariances(x, k.bandwidth)
    return float(g[0] + 2.0 * np.dot(w[1:], g[1:])) / T


def quadratic_form(s: np.ndarray, k: KernelSpec) -> np.ndarray:
    """s^T A s for each row s of ``s``, where A_{ts} = a((t-s)/m).

    Works on a vector or on a stack of series (last axis is time).
    """
    s = np.asarray(s, dtype=float)
    T = s.shape[-1]
    w = k.weights()
    out = np.einsum("...t,...t->...", s, s)
    for lag in range(1, min(k.bandwidth, T - 1) + 1):
        if w[lag] != 0.0:
            out = out + 2.0 * w[lag] * np.einsum("...t,...t->...", s[..., lag:], s[..., :T - lag])
    return out


@dataclass(frozen=True)
class LongRunMatrix:
    omega: np.ndarray
    bandwidth: int
    demeaned: bool = True
    kernel: str = "bartlett"

    @property
    def N(self) -> int:
        return self.omega.shape[0]


def _lagged_sum(x: np.ndarray, k: KernelSpec) -> np.ndarray:
    """sum_{t,s} a((t-s)/m) x_t x_s^T for x of shape N x T (banded in the lag)."""
    T = x.shape[1]
    w = k.weights()
    out = x @ x.T
    for lag in range(1, min(k.bandwidth, T - 1) + 1):
        if w[lag] == 0.0:
            continue
        g = x[:, lag:] @ x[:, :T - lag].T
        out += w[lag] * (g + g.T)
    return out


def hac_matrix_from_array(x: np.ndarray, k: KernelSpec, demean: bool = True) -> LongRunMatrix:
    x = np.asarray(x, dtype=float)
    T = x.shape[1]
    _check_bw(k, T, "panel")
    if demean:
        x = x - x.mean(axis=1, keepdims=True)
    om = _lagged_sum(x, k) / T
    return LongRunMatrix((om + om.T) / 2, k.bandwidth, demean, k.family)


def hac_matrix(p: Panel, k: KernelSpec, demean: bool = True) -> LongRunMatrix:
    """Kernel-weighted long-run covariance of the N unit series.

    Each unit is demeaned by its own time average.
    """
    if not p.is_balanced:
        raise PanelError("hac_matrix needs a balanced panel; use hac_matrix_unbalanced")
    return hac_matrix_from_array(p.values, k, demean)


def hac_matrix_unbalanced_from_array(x: np.ndarray, mask: np.ndarray, k: KernelSpec,
                                     unit_ids=None, demean: bool = True) -> LongRunMatrix:
    """(1/sqrt(T_i T_n)) sum over observed t in unit i and s in unit n."""
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=1)
    bad = np.flatnonzero(counts <= k.bandwidth)
    if bad.size:
        name = unit_ids[bad[0]] if unit_ids is not None else bad[0]
        raise BandwidthError(f"unit {name!r} has {counts[bad[0]]} observations, not more than bandwidth {k.bandwidth}")
    filled = np.where(mask, x, 0.0)
    if demean:
        means = filled.sum(axis=1) / counts
        filled = np.where(mask, x - means[:, None], 0.0)
    root = np.sqrt(counts.astype(float))
    om = _lagged_sum(filled, k) / np.outer(root, root)
    return LongRunMatrix((om + om.T) / 2, k.bandwidth, demean, k.family)


def hac_matrix_unbalanced(p: Panel, k: KernelSpec, demean: bool = True) -> LongRunMatrix:
    return hac_matrix_unbalanced_from_array(p.values, p.mask, k, p.unit_ids, demean)


EIG_FLOOR = 1e-12


def psd_sqrt(m, tol: float = 1e-8) -> np.ndarray:
    """Symmetric square root after setting eigenvalues below EIG_FLOOR * max to zero.

    The floor matters for rank-deficient inputs (centred scores have rank
    N - 1): the square root of a roundoff-level eigenvalue would otherwise
    inject noise of order 1e-8.
    """
    omega = m.omega if isinstance(m, LongRunMatrix) else np.asarray(m, dtype=float)
    scale = 1.0 + (np.max(np.abs(omega)) if omega.size else 0.0)
    if np.max(np.abs(omega - omega.T), initial=0.0) > tol * scale:
        raise ValueError("psd_sqrt needs a symmetric matrix")
    w, v = np.linalg.eigh((omega + omega.T) / 2)
    top = w.max() if w.size else 0.0
    w = np.where(w > EIG_FLOOR * max(top, 0.0), w, 0.0)
    s = (v * np.sqrt(w)) @ v.T
    return (s + s.T) / 2
