"""Latent group recovery over unit means.

Groups minimise S = (1/N) sum_j sum_{i in G_j} (xbar_i - nu_j)^2, and the
number of groups minimises S + rho * J.  Because the data are scalars, an
optimal partition is contiguous in sorted order, so the exact minimiser is a
dynamic program over split points; k-means++ with Lloyd iterations is kept for
large N and as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .panel import Panel, PanelError

DEFAULT_RESTARTS = 10
EXACT_MAX_N = 2000


class GroupingError(ValueError):
    """Invalid grouping request."""


@dataclass(frozen=True)
class GroupingResult:
    assignments: np.ndarray
    centers: np.ndarray
    J: int
    objective: float
    ic_path: dict = field(default_factory=dict)

    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignments == j) for j in range(self.J)]

    def to_dict(self, unit_ids=None) -> dict:
        ids = list(unit_ids) if unit_ids is not None else list(range(len(self.assignments)))
        return {
            "J": self.J,
            "objective": self.objective,
            "centers": self.centers.tolist(),
            "assignments": {str(u): int(g) for u, g in zip(ids, self.assignments)},
            "ic_path": {str(j): v for j, v in self.ic_path.items()},
        }


def objective(means: np.ndarray, labels: np.ndarray) -> float:
    """S evaluated at the group means implied by ``labels``."""
    x = np.asarray(means, dtype=float)
    total = 0.0
    for g in np.unique(labels):
        seg = x[labels == g]
        total += float(np.sum((seg - seg.mean()) ** 2))
    return total / x.size


def _canonical(x: np.ndarray, labels: np.ndarray) -> GroupingResult:
    """Relabel so groups are numbered by increasing center."""
    uniq = np.unique(labels)
    centers = np.array([x[labels == g].mean() for g in uniq])
    order = np.argsort(centers, kind="stable")
    remap = np.empty(uniq.max() + 1, dtype=int)
    remap[uniq[order]] = np.arange(uniq.size)
    new = remap[labels]
    return GroupingResult(new, centers[order], int(uniq.size), objective(x, new))


def _exact(x: np.ndarray, J: int) -> np.ndarray:
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    c1 = np.concatenate([[0.0], np.cumsum(xs)])
    c2 = np.concatenate([[0.0], np.cumsum(xs ** 2)])
    # cost[a, b]: within sum of squares of xs[a:b]
    a = np.arange(n + 1)[:, None]
    b = np.arange(n + 1)[None, :]
    cnt = np.where(b > a, b - a, 1)
    s1 = c1[b] - c1[a]
    cost = np.where(b > a, (c2[b] - c2[a]) - s1 ** 2 / cnt, np.inf)
    cost = np.maximum(cost, 0.0)
    best = cost[0].copy()                      # one group covering xs[:b]
    back = np.zeros((J, n + 1), dtype=int)
    for k in range(1, J):
        cand = best[:, None] + cost            # split at a, new group a..b
        back[k] = np.argmin(cand, axis=0)
        best = cand[back[k], np.arange(n + 1)]
    labels_sorted = np.empty(n, dtype=int)
    end = n
    for k in range(J - 1, -1, -1):
        start = back[k, end] if k > 0 else 0
        labels_sorted[start:end] = k
        end = start
    labels = np.empty(n, dtype=int)
    labels[order] = labels_sorted
    return labels


def _kmeanspp(x: np.ndarray, J: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.size)]]
    for _ in range(1, J):
        d2 = np.min((x[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        tot = d2.sum()
        if tot == 0.0:
            centers.append(x[rng.integers(x.size)])
        else:
            centers.append(x[rng.choice(x.size, p=d2 / tot)])
    return np.array(centers, dtype=float)


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = 1000) -> np.ndarray:
    labels = np.full(x.size, -1)
    J = centers.size
    for _ in range(max_iter):
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        # an emptied group takes the point farthest from its current center
        for g in range(J):
            if not np.any(new == g):
                far = int(np.argmax(np.abs(x - centers[new])))
                new[far] = g
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([x[labels == g].mean() for g in range(J)])
    return labels


def group_fixed_j(means, J: int, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                  method: str = "auto") -> GroupingResult:
    """Partition unit means into ``J`` groups minimising S.

    ``method``: ``"exact"`` (dynamic program, global minimum), ``"kmeans"``
    (best of ``restarts`` k-means++ / Lloyd runs, ties broken by restart
    index) or ``"auto"`` (exact up to ``EXACT_MAX_N`` units).
    """
    x = np.asarray(means, dtype=float).ravel()
    n = x.size
    if not 1 <= J <= n:
        raise GroupingError(f"J = {J} must lie between 1 and N = {n}")
    if not np.all(np.isfinite(x)):
        raise GroupingError("unit means must be finite")
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "kmeans"
    if method == "exact":
        return _canonical(x, _exact(x, J))
    if method != "kmeans":
        raise GroupingError(f"unknown method {method!r}")
    if restarts < 1:
        raise GroupingError("restarts must be at least 1")
    best = None
    for r in range(restarts):
        rng = _rng.stream(seed, r, _rng.GROUPING)
        labels = _lloyd(x, _kmeanspp(x, J, rng))
        obj = objective(x, labels)
        if best is None or obj < best[0]:
            best = (obj, labels)
    return _canonical(x, best[1])


def default_penalty(N: int, T: int) -> float:
    """1 / log(N + T)."""
    return 1.0 / math.log(N + T)


def select_j(means, j_max: int, rho_nt: float, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
             method: str = "auto") -> GroupingResult:
    """Minimise IC(J) = S_J + rho_nt * J over J = 1..j_max; ties go to the smaller J."""
    x = np.asarray(means, dtype=float).ravel()
    if j_max < 1:
        raise GroupingError("j_max must be at least 1")
    if not rho_nt > 0:
        raise GroupingError("rho_nt must be positive")
    best = None
    path = {}
    for J in range(1, min(j_max, x.size) + 1):
        res = group_fixed_j(x, J, restarts, seed, method)
        ic = res.objective + rho_nt * J
        path[J] = float(ic)
        if best is None or ic < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (ic, res)
    res = best[1]
    return GroupingResult(res.assignments, res.centers, res.J, res.objective, path)


def group_panel(p: Panel, j_max: int = 10, rho_nt: float | None = None,
                restarts: int = DEFAULT_RESTARTS, seed: int = 0, method: str = "auto") -> GroupingResult:
    """Unit means (over each unit's observed periods) followed by ``select_j``."""
    if p.N < 1:
        raise PanelError("empty panel")
    rho = default_penalty(p.N, p.T) if rho_nt is None else rho_nt
    return select_j(p.unit_means(), j_max, rho, restarts, seed, method)
