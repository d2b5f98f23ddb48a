"""Common correlated effects estimation and the slope-heterogeneity max test.

Model: y_it = w_it' theta_i + gamma_i' f_t + eps_it, w_it = Gamma_i' f_t + v_it.
Unobserved factors are projected out with the cross-sectional averages
zbar_t of z_it = (y_it, w_it')'.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _rng
from .bootstrap import DEFAULT_LEVELS, DEFAULT_REPS
from .dgp import Ar1PanelSpec, CASE_INNOVATION, simulate_ar1_matrix
from .homogeneity import TestReport, max_test
from .longrun import KernelSpec, default_kernel
from .panel import Panel, PanelError

PINV_RCOND = 1e-10
SCORES = ("residual", "product")


class CceError(PanelError):
    """Estimation failure; the message names the unit when one is to blame."""


@dataclass(frozen=True)
class CcePanelData:
    """y (N x T panel) and regressors w (N x T x K); missing cells follow y's mask."""

    y: Panel
    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim == 2:
            w = w[:, :, None]
        if w.ndim != 3 or w.shape[:2] != (self.y.N, self.y.T):
            raise CceError(f"w has shape {w.shape}; expected ({self.y.N}, {self.y.T}, K)")
        if w.shape[2] < 1:
            raise CceError("need at least one regressor")
        if not np.all(np.isfinite(w[self.y.mask])):
            raise CceError("regressors must be finite wherever y is observed")
        w = np.where(self.y.mask[:, :, None], w, np.nan)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def k_dim(self) -> int:
        return self.w.shape[2]

    @property
    def N(self) -> int:
        return self.y.N

    @property
    def T(self) -> int:
        return self.y.T

    def z(self) -> np.ndarray:
        """N x T x (K+1) stack of (y, w), zero at missing cells."""
        z = np.concatenate([self.y.values[:, :, None], self.w], axis=2)
        return np.where(self.y.mask[:, :, None], z, 0.0)

    def cross_section_means(self) -> np.ndarray:
        """T x (K+1) averages over the units observed at each period."""
        counts = self.y.mask.sum(axis=0)
        if np.any(counts == 0):
            t = int(np.flatnonzero(counts == 0)[0])
            raise CceError(f"no unit observed at period {self.y.time_ids[t]!r}")
        return self.z().sum(axis=0) / counts[:, None]


@dataclass(frozen=True)
class CceFit:
    theta_i: np.ndarray          # N x K
    theta_pooled: np.ndarray     # K
    residual_u: np.ndarray       # N x T x (K+1), M zbar applied per unit; zero where missing
    projector_rank: int
    gram: np.ndarray             # N x K x K, W_i' M W_i

    @property
    def N(self) -> int:
        return self.theta_i.shape[0]


def annihilator(zbar: np.ndarray, rcond: float = PINV_RCOND) -> tuple[np.ndarray, int]:
    """I - Z (Z'Z)^+ Z' and the rank retained by the pseudo-inverse."""
    z = np.asarray(zbar, dtype=float)
    g = z.T @ z
    ginv = np.linalg.pinv(g, rcond=rcond, hermitian=True)
    s = np.linalg.svd(g, compute_uv=False)
    rank = int(np.sum(s > rcond * s.max())) if s.size and s.max() > 0 else 0
    m = np.eye(z.shape[0]) - z @ ginv @ z.T
    return (m + m.T) / 2, rank


def _solve_unit(gram: np.ndarray, rhs: np.ndarray, unit: str) -> np.ndarray:
    s = np.linalg.svd(gram, compute_uv=False)
    if s.size == 0 or s.max() <= 0 or s.min() <= 1e-12 * s.max():
        raise CceError(f"W'MW is singular for unit {unit!r}")
    return np.linalg.solve(gram, rhs)


def cce_fit(d: CcePanelData, basis: np.ndarray | None = None) -> CceFit:
    """Unit-by-unit and pooled CCE estimators.

    For an unbalanced panel each unit uses the rows of zbar at its own
    observed periods, with zbar_t averaged over the units present at t.
    ``basis`` (T x r) replaces zbar, e.g. with known factors as an oracle.
    """
    K = d.k_dim
    y = d.y
    counts = y.t_counts
    if np.any(counts <= K + 1):
        i = int(np.flatnonzero(counts <= K + 1)[0])
        raise CceError(f"unit {y.unit_ids[i]!r} has {counts[i]} periods; need more than K + 1 = {K + 1}")
    z = d.z()
    zbar = d.cross_section_means() if basis is None else np.asarray(basis, dtype=float).reshape(d.T, -1)
    U = np.zeros_like(z)
    if y.is_balanced:
        m, rank = annihilator(zbar)
        U = np.einsum("ts,isk->itk", m, z)
    else:
        rank = 0
        for i in range(d.N):
            obs = y.mask[i]
            m, r = annihilator(zbar[obs])
            rank = max(rank, r)
            U[i, obs] = m @ z[i, obs]
    uy, uw = U[:, :, 0], U[:, :, 1:]
    gram = np.einsum("itk,itl->ikl", uw, uw)
    cross = np.einsum("itk,it->ik", uw, uy)
    theta = np.array([_solve_unit(gram[i], cross[i], y.unit_ids[i]) for i in range(d.N)])
    pooled = _solve_unit(gram.sum(axis=0), cross.sum(axis=0), "pooled")
    U.setflags(write=False)
    return CceFit(theta, pooled, U, rank, gram)


def q_components(fit: CceFit, j: int, counts: np.ndarray) -> np.ndarray:
    """(1/sqrt(T_i)) e_j' (W_i'MW_i)(theta_i - theta) for each unit (j is 0-based)."""
    diff = fit.theta_i - fit.theta_pooled
    return np.einsum("ik,ik->i", fit.gram[:, j, :], diff) / np.sqrt(counts)


def cce_scores(fit: CceFit, j: int, reading: str = "residual") -> np.ndarray:
    """N x T score panel whose long-run covariance calibrates Q_j.

    ``"residual"``: defactored regressor j times the unit's defactored residual
    u_y - u_w' theta_i.  ``"product"``: defactored regressor j times the
    defactored y, taken column by column.
    """
    U = fit.residual_u
    uw_j = U[:, :, 1 + j]
    if reading == "product":
        return U[:, :, 0] * uw_j
    if reading != "residual":
        raise ValueError(f"reading must be one of {SCORES}, got {reading!r}")
    resid = U[:, :, 0] - np.einsum("itk,ik->it", U[:, :, 1:], fit.theta_i)
    return uw_j * resid


def cce_heterogeneity_test(d: CcePanelData, j: int, k: KernelSpec | None = None, R: int = DEFAULT_REPS,
                           levels: Sequence[float] = DEFAULT_LEVELS, seed: int = 0,
                           reading: str = "residual", fit: CceFit | None = None,
                           basis: np.ndarray | None = None) -> TestReport:
    """H0: coefficient j (1-based) of theta_i is common to all units.

    Statistic max_i |Q_ij|; critical values from the Gaussian multiplier
    bootstrap on the HAC long-run covariance of the score panel (see
    ``cce_scores``).  Scores enter the HAC estimator without demeaning.
    """
    if not 1 <= j <= d.k_dim:
        raise CceError(f"coefficient index {j} must lie in 1..{d.k_dim}")
    k = k or default_kernel(d.T)
    fit = fit or cce_fit(d, basis)
    counts = d.y.t_counts
    comp = q_components(fit, j - 1, counts)
    scores = cce_scores(fit, j - 1, reading)
    mask = None if d.y.is_balanced else d.y.mask
    rep = max_test(comp, scores, k, R, levels, seed, mask, two_sided=True, demean=False, config={
        "test": "cce_heterogeneity", "coef": j, "K": d.k_dim, "N": d.N, "T": d.T,
        "reading": reading, "projector_rank": fit.projector_rank}, labels=d.y.unit_ids)
    rep.config["theta_pooled"] = fit.theta_pooled.tolist()
    return rep


cce_heterogeneity_test.__test__ = False


# ----------------------------------------------------------------------------
# Monte Carlo design with one factor and one regressor


def simulate_cce_panel(N: int, T: int, theta, case: int = 1, rho_nu: float = 0.5, rho_x: float = 0.3,
                       seed: int = 0, replicate: int = 0, return_factor: bool = False):
    """One-factor, one-regressor design.

    eps follows the correlated AR(1) panel (mean zero); v_it = eps_{i,t-1};
    f_t ~ N(0, 1.5), gamma_i ~ N(0.8, 1), Gamma_i ~ N(-0.2, 2) with the second
    argument a variance.  ``theta`` is a scalar or an N-vector.  With
    ``return_factor`` the factor path f is returned as well.
    """
    if case not in CASE_INNOVATION:
        raise ValueError(f"case must be one of {sorted(CASE_INNOVATION)}")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (N,))
    spec = Ar1PanelSpec.toeplitz(np.zeros(N), rho_x, rho_nu, CASE_INNOVATION[case])
    eps = simulate_ar1_matrix(spec, T, _rng.stream(seed, replicate, _rng.DGP), extra_lead=1).T  # N x (T+1)
    nuis = _rng.stream(seed, replicate, _rng.NUISANCE)
    f = nuis.normal(0.0, np.sqrt(1.5), T)
    gamma = nuis.normal(0.8, 1.0, N)
    big_gamma = nuis.normal(-0.2, np.sqrt(2.0), N)
    v = eps[:, :-1]
    e = eps[:, 1:]
    w = big_gamma[:, None] * f[None, :] + v
    y = theta[:, None] * w + gamma[:, None] * f[None, :] + e
    d = CcePanelData(Panel.from_array(y), w[:, :, None])
    return (d, f) if return_factor else d
