"""Ground-truth panel generators.

Covers the truncated high-dimensional moving average x_t = mu + sum_l B_l eps_{t-l},
the cross-sectionally correlated AR(1) design used in the Monte Carlo
experiments, integrated (unit-root) panels, and the Beveridge-Nelson split of
the lag polynomial used as an exact oracle for partial sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _rng
from .panel import Panel

Sampler = Callable[[np.random.Generator, tuple], np.ndarray]
Innovation = Union[str, Sampler]

INNOVATIONS = ("gauss", "t8", "gamma22_centered")
CASE_INNOVATION = {1: "gauss", 2: "t8", 3: "gamma22_centered"}

_T_DOF = 8
# Gamma(shape 2, scale 1/2): mean 1, variance 1/2
_GAMMA_SHAPE, _GAMMA_SCALE = 2.0, 0.5


class SpecError(ValueError):
    """Inconsistent generator specification."""


def draw_innovations(law: Innovation, rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Mean-zero, unit-variance i.i.d. draws from ``law``.

    ``gamma22_centered`` is Gamma(2, scale 0.5) - 1 rescaled by sqrt(2) so the
    variance is one; ``t8`` is Student t(8) scaled by sqrt(6/8).
    """
    if callable(law):
        return np.asarray(law(rng, shape), dtype=float).reshape(shape)
    if law == "gauss":
        return rng.standard_normal(shape)
    if law == "t8":
        return rng.standard_t(_T_DOF, size=shape) * math.sqrt((_T_DOF - 2) / _T_DOF)
    if law == "gamma22_centered":
        g = rng.gamma(_GAMMA_SHAPE, _GAMMA_SCALE, size=shape)
        mean = _GAMMA_SHAPE * _GAMMA_SCALE
        sd = math.sqrt(_GAMMA_SHAPE) * _GAMMA_SCALE
        return (g - mean) / sd
    raise SpecError(f"unknown innovation law {law!r}; expected one of {INNOVATIONS} or a callable")


def innovation_kappa3(law: Innovation) -> float:
    """Third cumulant of the standardized law."""
    if law in ("gauss", "t8"):
        return 0.0
    if law == "gamma22_centered":
        return 2.0 / math.sqrt(_GAMMA_SHAPE)
    raise SpecError("third cumulant of a custom sampler is unknown; pass kappa3 explicitly")


def _law_name(law: Innovation) -> str:
    if callable(law):
        raise SpecError("custom samplers cannot be serialized")
    return law


def sym_psd_sqrt(a: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero.

    Raises ``SpecError`` when ``a`` is asymmetric, or indefinite beyond
    ``tol`` relative to its largest absolute eigenvalue.
    """
    a = np.asarray(a, dtype=float)
    scale = 1.0 + np.max(np.abs(a)) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
        raise SpecError("matrix is not symmetric")
    w, v = np.linalg.eigh((a + a.T) / 2)
    if w.size and w.min() < -tol * max(1.0, np.abs(w).max()):
        raise SpecError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def toeplitz_corr(n: int, rho: float) -> np.ndarray:
    """{rho^|i-j|} correlation matrix."""
    idx = np.arange(n)
    return float(rho) ** np.abs(idx[:, None] - idx[None, :])


# ----------------------------------------------------------------------------
# HDMA


@dataclass(frozen=True)
class HdmaSpec:
    mu: np.ndarray
    coeffs: tuple
    innovation: Innovation = "gauss"
    burn_in: int = 0

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        coeffs = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.coeffs)
        if not coeffs:
            raise SpecError("at least one coefficient matrix (B_0) is required")
        n = mu.shape[0]
        for ell, b in enumerate(coeffs):
            if b.shape != (n, n):
                raise SpecError(f"B_{ell} has shape {b.shape}; expected {(n, n)} to match mu")
        if self.burn_in < 0:
            raise SpecError("burn_in must be nonnegative")
        if not callable(self.innovation) and self.innovation not in INNOVATIONS:
            raise SpecError(f"unknown innovation law {self.innovation!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def order(self) -> int:
        """Highest lag L."""
        return len(self.coeffs) - 1

    @property
    def b_sum(self) -> np.ndarray:
        return np.sum(self.coeffs, axis=0)

    def autocov(self, lag: int) -> np.ndarray:
        """Cov(x_{t+lag}, x_t) = sum_l B_{l+lag} B_l^T."""
        lag = abs(int(lag))
        out = np.zeros((self.N, self.N))
        for ell in range(len(self.coeffs) - lag):
            out += self.coeffs[ell + lag] @ self.coeffs[ell].T
        return out

    def long_run_cov(self) -> np.ndarray:
        b = self.b_sum
        return b @ b.T

    def to_dict(self) -> dict:
        return {
            "kind": "hdma",
            "mu": self.mu.tolist(),
            "coeffs": [b.tolist() for b in self.coeffs],
            "innovation": _law_name(self.innovation),
            "burn_in": self.burn_in,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HdmaSpec":
        return cls(np.asarray(d["mu"]), tuple(np.asarray(b) for b in d["coeffs"]),
                   d.get("innovation", "gauss"), int(d.get("burn_in", 0)))

    @classmethod
    def iid(cls, n: int, innovation: Innovation = "gauss") -> "HdmaSpec":
        return cls(np.zeros(n), (np.eye(n),), innovation)

    @classmethod
    def one_factor(cls, n: int, innovation: Innovation = "gauss") -> "HdmaSpec":
        """B_0 = 1 1^T / sqrt(N): every unit loads on the same shock."""
        return cls(np.zeros(n), (np.ones((n, n)) / math.sqrt(n),), innovation)


def _hdma_from_innovations(spec: HdmaSpec, eps: np.ndarray, T: int) -> np.ndarray:
    """x (T x N) from innovations eps whose last T rows are periods 1..T."""
    P = eps.shape[0] - T
    if P < spec.order:
        raise SpecError(f"need at least {spec.order} presample innovations, got {P}")
    x = np.broadcast_to(spec.mu, (T, spec.N)).copy()
    for ell, b in enumerate(spec.coeffs):
        x += eps[P - ell:P - ell + T] @ b.T
    return x


def simulate_hdma(spec: HdmaSpec, T: int, seed: int, replicate: int = 0,
                  return_innovations: bool = False):
    """Draw an N x T panel from ``spec``.

    Innovations for periods 1-L-burn_in .. T come from one seeded stream, so
    the result depends only on (spec, T, seed, replicate).  With
    ``return_innovations`` the (L + burn_in + T) x N innovation matrix is also
    returned (row r is period r - L - burn_in + 1).
    """
    if T < 2:
        raise SpecError("a panel needs at least 2 periods")
    P = spec.order + spec.burn_in
    rng = _rng.stream(seed, replicate, _rng.DGP)
    eps = draw_innovations(spec.innovation, rng, (P + T, spec.N))
    panel = Panel.from_array(_hdma_from_innovations(spec, eps, T).T)
    return (panel, eps) if return_innovations else panel


# ----------------------------------------------------------------------------
# AR(1) panels


@dataclass(frozen=True)
class Ar1PanelSpec:
    """x_t = mu + rho_x x_{t-1} + Sigma_nu^{1/2} nu_t with i.i.d. standardized nu."""

    mu: np.ndarray
    rho_x: float
    sigma_nu: np.ndarray
    innovation: Innovation = "gauss"
    burn_in: int = 200

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma_nu, dtype=float))
        if not -1.0 < self.rho_x < 1.0:
            raise SpecError("rho_x must lie in (-1, 1)")
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise SpecError(f"sigma_nu has shape {sigma.shape}; expected {(mu.shape[0],) * 2}")
        if self.burn_in < 0:
            raise SpecError("burn_in must be nonnegative")
        sqrt = sym_psd_sqrt(sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_nu", sigma)
        object.__setattr__(self, "_sqrt", sqrt)

    @classmethod
    def toeplitz(cls, mu, rho_x: float, rho_nu: float, innovation: Innovation = "gauss",
                 burn_in: int = 200) -> "Ar1PanelSpec":
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return cls(mu, rho_x, toeplitz_corr(mu.shape[0], rho_nu), innovation, burn_in)

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def sigma_sqrt(self) -> np.ndarray:
        return self._sqrt

    def long_run_cov(self) -> np.ndarray:
        return self.sigma_nu / (1.0 - self.rho_x) ** 2

    def stationary_cov(self) -> np.ndarray:
        return self.sigma_nu / (1.0 - self.rho_x ** 2)

    def to_dict(self) -> dict:
        return {"kind": "ar1", "mu": self.mu.tolist(), "rho_x": self.rho_x,
                "sigma_nu": self.sigma_nu.tolist(), "innovation": _law_name(self.innovation),
                "burn_in": self.burn_in}

    @classmethod
    def from_dict(cls, d: dict) -> "Ar1PanelSpec":
        return cls(np.asarray(d["mu"]), float(d["rho_x"]), np.asarray(d["sigma_nu"]),
                   d.get("innovation", "gauss"), int(d.get("burn_in", 200)))


def simulate_ar1_matrix(spec: Ar1PanelSpec, T: int, rng: np.random.Generator,
                        extra_lead: int = 0) -> np.ndarray:
    """T + extra_lead kept periods (time-major, shape (T + extra_lead) x N).

    The recursion starts from zero at period -burn_in and the first
    ``burn_in + 1`` periods are dropped.
    """
    total = spec.burn_in + 1 + T + extra_lead
    shocks = draw_innovations(spec.innovation, rng, (total, spec.N)) @ spec.sigma_sqrt.T
    x = np.empty((total, spec.N))
    prev = np.zeros(spec.N)
    for t in range(total):
        prev = spec.mu + spec.rho_x * prev + shocks[t]
        x[t] = prev
    return x[spec.burn_in + 1:]


def simulate_ar1_panel(spec: Ar1PanelSpec, T: int, seed: int, replicate: int = 0) -> Panel:
    if T < 2:
        raise SpecError("T must be at least 2")
    x = simulate_ar1_matrix(spec, T, _rng.stream(seed, replicate, _rng.DGP))
    return Panel.from_array(x.T)


# ----------------------------------------------------------------------------
# Beveridge-Nelson split


@dataclass(frozen=True)
class BnParts:
    """B(L) = B - (1 - L) Btilde(L) with Btilde_l = sum_{k > l} B_k."""

    b_sum: np.ndarray
    b_tilde: tuple

    def tilde(self, ell: int) -> np.ndarray:
        if 0 <= ell < len(self.b_tilde):
            return self.b_tilde[ell]
        return np.zeros_like(self.b_sum)


def bn_decompose(spec: HdmaSpec) -> BnParts:
    coeffs = spec.coeffs
    L = len(coeffs) - 1
    tilde = []
    acc = np.zeros((spec.N, spec.N))
    for ell in range(L - 1, -1, -1):
        acc = acc + coeffs[ell + 1]
        tilde.append(acc.copy())
    return BnParts(np.sum(coeffs, axis=0), tuple(reversed(tilde)))


def bn_partial_sums(spec: HdmaSpec, eps: np.ndarray, T: int):
    """Partial sums sum_{s<=t} (x_s - mu) three ways, for t = 1..T.

    ``eps`` must hold at least L presample rows followed by periods 1..T.
    Returns ``(direct, rep_a, rep_b)``, each T x N:

    * direct: cumulative sum of the simulated panel;
    * rep_a: B sum eps_s - Btilde(L) eps_t + Btilde(L) eps_0;
    * rep_b: sum_{l=1}^t (B - Btilde_{t-l}) eps_l - sum_{l<=0} (Btilde_{t-l} - Btilde_{-l}) eps_l.
    """
    parts = bn_decompose(spec)
    L = spec.order
    P = eps.shape[0] - T
    if P < L:
        raise SpecError(f"need at least {L} presample innovations, got {P}")
    n = spec.N

    def e(time: int) -> np.ndarray:
        return eps[P - 1 + time]

    x = _hdma_from_innovations(spec, eps, T) - spec.mu
    direct = np.cumsum(x, axis=0)

    def tilde_poly(time: int) -> np.ndarray:
        out = np.zeros(n)
        for ell in range(L):
            out += parts.b_tilde[ell] @ e(time - ell)
        return out

    eps_cum = np.cumsum(eps[P:P + T], axis=0)
    tail0 = tilde_poly(0)
    rep_a = np.empty((T, n))
    rep_b = np.empty((T, n))
    for t in range(1, T + 1):
        rep_a[t - 1] = parts.b_sum @ eps_cum[t - 1] - tilde_poly(t) + tail0
        acc = np.zeros(n)
        for ell in range(1, t + 1):
            acc += (parts.b_sum - parts.tilde(t - ell)) @ e(ell)
        # presample terms vanish for l <= -L
        for ell in range(1 - L, 1):
            acc -= (parts.tilde(t - ell) - parts.tilde(-ell)) @ e(ell)
        rep_b[t - 1] = acc
    return direct, rep_a, rep_b


# ----------------------------------------------------------------------------
# unit-root panels


def simulate_unit_root(spec: HdmaSpec, T: int, seed: int, replicate: int = 0) -> Panel:
    """y_t = y_{t-1} + B(L) eps_t with y_0 = 0; the mean of ``spec`` is ignored."""
    zero = HdmaSpec(np.zeros(spec.N), spec.coeffs, spec.innovation, spec.burn_in)
    x = simulate_hdma(zero, T, seed, replicate)
    return Panel.from_array(np.cumsum(x.values, axis=1))


def unit_root_moment(p: Panel) -> float:
    """(1 / (N T^2)) sum_i sum_t y_it^2."""
    y = p.require_balanced("unit_root_moment")
    return float(np.sum(y ** 2) / (p.N * p.T ** 2))


def unit_root_limit(spec: HdmaSpec) -> float:
    """b / 2 with b = ||B||_F^2 / N."""
    return float(np.sum(spec.b_sum ** 2) / spec.N / 2.0)


# ----------------------------------------------------------------------------
# skewness correction term


def edgeworth_beta3_star(spec: HdmaSpec, T: int, L_N: float, kappa3: float | None = None) -> float:
    """Skewness term of the one-term Edgeworth expansion for the scaled grand sum.

    kappa3 / (sigma_x^{3/2} L_N^{3/2} sqrt(T)) * sum_j (1^T b_j)^3, where b_j is
    column j of B = sum_l B_l and sigma_x^2 = 1^T B B^T 1 / L_N.
    """
    if L_N <= 0 or T < 1:
        raise SpecError("L_N must be positive and T >= 1")
    k3 = innovation_kappa3(spec.innovation) if kappa3 is None else float(kappa3)
    b = spec.b_sum
    col_sums = b.sum(axis=0)
    sigma2 = float(col_sums @ col_sums) / L_N
    if sigma2 <= 0.0:
        raise SpecError("degenerate variance: 1^T B B^T 1 = 0")
    if k3 == 0.0:
        return 0.0
    return k3 / (sigma2 ** 0.75 * L_N ** 1.5 * math.sqrt(T)) * float(np.sum(col_sums ** 3))


def spec_from_dict(d: dict):
    kind = d.get("kind", "hdma")
    if kind == "hdma":
        return HdmaSpec.from_dict(d)
    if kind == "ar1":
        return Ar1PanelSpec.from_dict(d)
    raise SpecError(f"unknown spec kind {kind!r}")
