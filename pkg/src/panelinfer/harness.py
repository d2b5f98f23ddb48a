"""Monte Carlo experiment runner with deterministic seeding and checkpoints.

One ``ExperimentConfig`` is one table cell.  Replicate r of a cell draws its
data from stream (seed, r, DGP) and its bootstrap from a seed derived from
(seed, r, BOOTSTRAP), so any replicate can be recomputed on its own.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import signal

from . import _rng
from .bootstrap import MultiplierSpec
from .cce import cce_heterogeneity_test, simulate_cce_panel
from .dgp import CASE_INNOVATION, Ar1PanelSpec, HdmaSpec, simulate_ar1_panel, simulate_unit_root, \
    toeplitz_corr, unit_root_limit, unit_root_moment
from .homogeneity import CompetitorStatistic, test_common_mean, test_homogeneity, test_unit_means
from .longrun import KernelSpec, autocovariances, default_bandwidth, mse_optimal_bandwidth, optimal_bandwidth
from .panel import SCHEMA_VERSION

log = logging.getLogger(__name__)

EXPERIMENTS = ("sim1", "sim2", "sim3", "prop3", "custom")
SCENARIOS = ("a", "b", "c")
WORKERS_ENV = "PANELINFER_WORKERS"

# Desk budget: N * T * R_mc * max(R_boot, 1) at most that of N=50, T=150,
# R_mc=500, R_boot=199 (our own choice; about ten minutes for sim1 on a laptop).
DESK_BUDGET = 50 * 150 * 500 * 199
KEY_FIELDS = ("experiment", "case", "scenario", "N", "T", "rho_nu")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "sim1"
    case: int = 1
    scenario: str = "a"
    rho_nu: float = 0.5
    rho_x: float = 0.3
    N: int = 30
    T: int = 100
    R_mc: int = 500
    R_boot: int = 199
    kernel: str = "bartlett"
    bandwidth: int | None = None
    seed: int = 7
    scale: str = "desk"
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.case not in CASE_INNOVATION:
            raise ConfigError(f"case must be one of {sorted(CASE_INNOVATION)}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.scale not in ("desk", "paper"):
            raise ConfigError("scale must be 'desk' or 'paper'")
        if self.N < 2 or self.T < 3 or self.R_mc < 1 or self.R_boot < 0:
            raise ConfigError("need N >= 2, T >= 3, R_mc >= 1, R_boot >= 0")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.scale == "desk" and self.cost() > DESK_BUDGET:
            raise ConfigError(f"cell cost N*T*R_mc*R_boot = {self.cost()} exceeds the desk budget {DESK_BUDGET}")

    def cost(self) -> int:
        return self.N * self.T * self.R_mc * max(self.R_boot, 1)

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.bandwidth or default_bandwidth(self.T))

    def key(self) -> tuple:
        return (self.experiment, self.case, self.scenario, self.N, self.T, self.rho_nu)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def preset_grid(experiment: str, scale: str = "desk", seed: int = 7, **override) -> list[ExperimentConfig]:
    """Cells of the table for ``experiment`` at ``scale``.

    Paper scale uses R_mc = 1000 and R_boot = 399; desk scale shrinks N, T and
    the replication counts to CI-friendly sizes.
    """
    paper = scale == "paper"
    if experiment == "sim1":
        base = dict(R_mc=1000 if paper else 500, R_boot=399 if paper else 199)
        Ns, Ts = ((100, 150, 200), (200, 400)) if paper else ((30,), (100,))
        cells = [dict(case=c, scenario=s, rho_nu=r, N=n, T=t)
                 for r in (0.5, 0.95) for c in (1, 2, 3) for s in SCENARIOS for t in Ts for n in Ns]
    elif experiment == "sim2":
        base = dict(R_mc=1000 if paper else 500, R_boot=399 if paper else 199)
        Ns, Ts = ((100, 150, 200), (200, 400)) if paper else ((30,), (100,))
        cells = [dict(case=c, scenario="a", rho_nu=r, N=n, T=t)
                 for c in (1, 2, 3) for r in (0.5, 0.95) for t in Ts for n in Ns]
    elif experiment == "sim3":
        base = dict(R_mc=1000 if paper else 300, R_boot=399 if paper else 199, rho_nu=0.5)
        Ns, Ts = ((100, 150), (150, 200)) if paper else ((40,), (100,))
        cells = [dict(case=c, scenario=s, N=n, T=t) for c in (1, 2, 3) for t in Ts for s in SCENARIOS for n in Ns]
    elif experiment == "prop3":
        base = dict(R_mc=1000 if paper else 200, R_boot=0)
        cells = [dict(N=200, T=200)]
    else:
        raise ConfigError(f"no preset grid for {experiment!r}")
    out = []
    for c in cells:
        d = {**base, **c, **override, "experiment": experiment, "scale": scale, "seed": seed}
        out.append(ExperimentConfig.from_dict(d))
    return out


# ----------------------------------------------------------------------------
# per-replicate outcomes


def scenario_shift(scenario: str, T: int) -> float:
    """Deviation of unit 1 under scenarios a (none), b (4/sqrt(T)) and c (1)."""
    return {"a": 0.0, "b": 4.0 / math.sqrt(T), "c": 1.0}[scenario]


def sim_panel_spec(cfg: ExperimentConfig) -> Ar1PanelSpec:
    mu = np.zeros(cfg.N)
    mu[0] = scenario_shift(cfg.scenario, cfg.T)
    return Ar1PanelSpec.toeplitz(mu, cfg.rho_x, cfg.rho_nu, CASE_INNOVATION[cfg.case])


def prop3_spec(N: int) -> HdmaSpec:
    """MA(1) with B_0 = I and B_1 = 0.5 * {0.5^|i-j|}: serial and cross-sectional dependence."""
    return HdmaSpec(np.zeros(N), (np.eye(N), 0.5 * toeplitz_corr(N, 0.5)))


def boot_seed(cfg: ExperimentConfig, r: int) -> int:
    return _rng.derived_seed(cfg.seed, r, _rng.BOOTSTRAP)


def replicate_outcome(cfg: ExperimentConfig, r: int,
                      competitors: Sequence[CompetitorStatistic] = ()) -> dict:
    """Everything replicate ``r`` contributes to its cell, as plain floats."""
    k = cfg.kernel_spec
    bs = boot_seed(cfg, r)
    if cfg.experiment == "sim1":
        p = simulate_ar1_panel(sim_panel_spec(cfg), cfg.T, cfg.seed, r)
        rep = test_homogeneity(p, k, cfg.R_boot, (cfg.level,), bs)
        out = {"reject": float(rep.decisions[cfg.level])}
        for c in competitors:
            out[f"reject_{c.name}"] = float(c(p, cfg.level)[1])
        return out
    if cfg.experiment == "sim2":
        # coverage of the true means: the null value enters statistic and draws alike
        p = simulate_ar1_panel(sim_panel_spec(cfg), cfg.T, cfg.seed, r)
        spec = MultiplierSpec(k, cfg.T)
        truth = sim_panel_spec(cfg).mu
        common = test_common_mean(p, float(np.mean(truth)), spec, cfg.R_boot, cfg.level, bs)
        units = test_unit_means(p, truth, spec, cfg.R_boot, cfg.level, bs)
        return {"miss_hm": float(common.reject), "miss_he": [float(u.reject) for u in units]}
    if cfg.experiment == "sim3":
        theta = np.ones(cfg.N)
        theta[0] += scenario_shift(cfg.scenario, cfg.T)
        d = simulate_cce_panel(cfg.N, cfg.T, theta, cfg.case, cfg.rho_nu, cfg.rho_x, cfg.seed, r)
        rep = cce_heterogeneity_test(d, 1, k, cfg.R_boot, (cfg.level,), bs)
        return {"reject": float(rep.decisions[cfg.level])}
    if cfg.experiment == "prop3":
        y = simulate_unit_root(prop3_spec(cfg.N), cfg.T, cfg.seed, r)
        return {"moment": unit_root_moment(y)}
    raise ConfigError("custom experiments need a replicate function")


# ----------------------------------------------------------------------------
# result tables


@dataclass
class ResultRow:
    key: dict
    values: dict
    se: dict
    R_mc: int

    def flat(self) -> dict:
        out = dict(self.key)
        for name, v in self.values.items():
            out[name] = v
            out[f"{name}_se"] = self.se.get(name, float("nan"))
        out["R_mc"] = self.R_mc
        return out


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def extend(self, other: "ResultTable") -> "ResultTable":
        self.rows.extend(other.rows)
        return self

    def value(self, metric: str, **key) -> float:
        for row in self.rows:
            if all(row.key.get(k) == v for k, v in key.items()):
                return row.values[metric]
        raise KeyError(key)

    def row(self, **key) -> ResultRow:
        for row in self.rows:
            if all(row.key.get(k) == v for k, v in key.items()):
                return row
        raise KeyError(key)

    def metric_names(self) -> list[str]:
        names: list[str] = []
        for row in self.rows:
            for n in row.values:
                if n not in names:
                    names.append(n)
        return names

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION,
                "rows": [{"key": r.key, "values": r.values, "se": r.se, "R_mc": r.R_mc} for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultTable":
        return cls([ResultRow(dict(r["key"]), dict(r["values"]), dict(r["se"]), int(r["R_mc"])) for r in d["rows"]])

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for rec in reader:
            key = {}
            for f in KEY_FIELDS:
                v = rec.pop(f)
                key[f] = v if f in ("experiment", "scenario") else (float(v) if f == "rho_nu" else int(v))
            R = int(rec.pop("R_mc"))
            values, se = {}, {}
            for name, v in rec.items():
                if name.endswith("_se"):
                    continue
                values[name] = float(v)
                se[name] = float(rec[f"{name}_se"])
            rows.append(ResultRow(key, values, se, R))
        return cls(rows)


def binomial_se(rate: float, R: int) -> float:
    """sqrt(r (1 - r) / R)."""
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / R)


def summarize(cfg: ExperimentConfig, outcomes: Sequence[dict]) -> ResultRow:
    """Reduce per-replicate outcomes to the cell's rates and MC standard errors."""
    R = len(outcomes)
    key = dict(zip(KEY_FIELDS, cfg.key()))
    values, se = {}, {}
    if not outcomes:
        return ResultRow(key, values, se, 0)
    if cfg.experiment == "sim2":
        hm = np.array([o["miss_hm"] for o in outcomes])
        he = np.array([o["miss_he"] for o in outcomes])        # R x N
        per_unit = he.mean(axis=0)
        per_rep = he.mean(axis=1)
        values["delta_hm"] = float(hm.mean())
        se["delta_hm"] = binomial_se(values["delta_hm"], R)
        values["delta_he"] = float(np.mean(np.abs(per_unit)))
        se["delta_he"] = float(per_rep.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
        values["sd_he"] = float(np.sqrt(np.mean((np.abs(per_unit) - values["delta_he"]) ** 2)))
        se["sd_he"] = float("nan")
    elif cfg.experiment == "prop3":
        m = np.array([o["moment"] for o in outcomes])
        limit = unit_root_limit(prop3_spec(cfg.N))
        values["moment"] = float(m.mean())
        se["moment"] = float(m.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
        values["limit"] = limit
        se["limit"] = 0.0
        values["rel_error"] = values["moment"] / limit - 1.0
        se["rel_error"] = se["moment"] / limit
    else:
        for name in outcomes[0]:
            arr = np.array([o[name] for o in outcomes], dtype=float)
            values[name] = float(arr.mean())
            binary = np.all((arr == 0.0) | (arr == 1.0))
            se[name] = binomial_se(values[name], R) if binary else (
                float(arr.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan"))
    return ResultRow(key, values, se, R)


# ----------------------------------------------------------------------------
# running


def _load_checkpoint(path: str, cfg: ExperimentConfig) -> dict[int, dict]:
    done: dict[int, dict] = {}
    if not os.path.exists(path):
        return done
    try:
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("fingerprint") != cfg.fingerprint():
                raise ValueError("checkpoint belongs to a different configuration")
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    done[int(rec["r"])] = rec["out"]
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        warnings.warn(f"ignoring unusable checkpoint {path} ({exc}); starting fresh", RuntimeWarning)
        return {}
    return done


def _open_checkpoint(path: str, cfg: ExperimentConfig, done: dict[int, dict]):
    fh = open(path, "w")
    fh.write(json.dumps({"schema_version": SCHEMA_VERSION, "fingerprint": cfg.fingerprint(),
                         "config": cfg.to_dict()}) + "\n")
    for r in sorted(done):
        fh.write(json.dumps({"r": r, "out": done[r]}) + "\n")
    fh.flush()
    return fh


def _run_chunk(args) -> list[tuple[int, dict]]:
    cfg, rs, fn = args
    return [(r, fn(cfg, r)) for r in rs]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, checkpoint: str | None = None,
                   competitors: Sequence[CompetitorStatistic] = (),
                   replicate_fn: Callable[[ExperimentConfig, int], dict] | None = None,
                   workers: int | None = None, progress: Callable[[int, int], None] | None = None) -> ResultTable:
    """Run every replicate of one cell and reduce to a one-row table.

    With ``checkpoint`` each finished replicate is appended to a JSON-lines
    file and a rerun skips replicates already recorded.  ``replicate_fn``
    overrides the built-in per-replicate computation (required for
    ``custom``).  Worker processes default to ``$PANELINFER_WORKERS``.
    """
    if replicate_fn is None:
        if cfg.experiment == "custom":
            raise ConfigError("custom experiments need replicate_fn")
        if competitors:
            replicate_fn = functools.partial(replicate_outcome, competitors=tuple(competitors))
        else:
            replicate_fn = replicate_outcome
    done = _load_checkpoint(checkpoint, cfg) if checkpoint else {}
    todo = [r for r in range(cfg.R_mc) if r not in done]
    fh = _open_checkpoint(checkpoint, cfg, done) if checkpoint else None
    workers = workers or worker_count()
    step = max(1, cfg.R_mc // 10)
    try:
        if workers > 1 and len(todo) > 1:
            chunks = [todo[i::workers] for i in range(workers)]
            with ProcessPoolExecutor(workers) as pool:
                results = [item for part in pool.map(_run_chunk, [(cfg, c, replicate_fn) for c in chunks])
                           for item in part]
        else:
            results = None
        source = results if results is not None else ((r, replicate_fn(cfg, r)) for r in todo)
        for r, out in source:
            done[r] = out
            if fh:
                fh.write(json.dumps({"r": r, "out": out}) + "\n")
                fh.flush()
            if progress:
                progress(len(done), cfg.R_mc)
            elif len(done) % step == 0:
                log.info("%s %s: %d/%d replicates", cfg.experiment, cfg.key(), len(done), cfg.R_mc)
    finally:
        if fh:
            fh.close()
    outcomes = [done[r] for r in range(cfg.R_mc)]
    return ResultTable([summarize(cfg, outcomes)])


def run_grid(cfgs: Sequence[ExperimentConfig], checkpoint_dir: str | None = None, **kwargs) -> ResultTable:
    table = ResultTable()
    for cfg in cfgs:
        ck = None
        if checkpoint_dir:
            os.makedirs(checkpoint_dir, exist_ok=True)
            ck = os.path.join(checkpoint_dir, f"{cfg.experiment}-{cfg.fingerprint()}.jsonl")
        table.extend(run_experiment(cfg, ck, **kwargs))
    return table


# ----------------------------------------------------------------------------
# bandwidth experiment


@dataclass(frozen=True)
class BandwidthStudy:
    T: int
    m_grid: tuple
    mse: tuple
    empirical_minimizer: int
    mse_minimizer: float
    displayed_rule: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def ar1_bandwidth_constants(rho: float) -> tuple[float, float]:
    """(sigma^2, Delta_1) of a unit-innovation AR(1): long-run variance and sum |k| gamma(k)."""
    sigma2 = 1.0 / (1.0 - rho) ** 2
    delta1 = 2.0 * rho / ((1.0 - rho) ** 2 * (1.0 - rho ** 2))
    return sigma2, delta1


def mse_bandwidth_experiment(T: int, m_grid: Sequence[int], R: int = 400, rho: float = 0.5,
                             seed: int = 0, kernel: str = "bartlett", burn_in: int = 200) -> BandwidthStudy:
    """Empirical MSE of sigma*^2 / sigma^2 over ``m_grid`` for an AR(1) series.

    sigma*^2 = (1/T) s'As is the conditional variance of the bootstrap sum,
    i.e. the kernel estimate of the long-run variance, and sigma^2 its true
    value.  Also reports the minimiser of the leading MSE terms and the
    rounded closed-form rule from ``optimal_bandwidth``.
    """
    grid = sorted(int(m) for m in m_grid)
    if not grid or grid[0] < 1 or grid[-1] >= T:
        raise ValueError("bandwidths must lie in 1..T-1")
    sigma2, delta1 = ar1_bandwidth_constants(rho)
    sq = np.zeros(len(grid))
    for r in range(R):
        rng = _rng.stream(seed, r, _rng.DGP)
        x = signal.lfilter([1.0], [1.0, -rho], rng.standard_normal(T + burn_in))[burn_in:]
        x = x - x.mean()
        g = autocovariances(x, grid[-1]) / T
        for gi, m in enumerate(grid):
            w = KernelSpec(kernel, m).weights()
            est = g[0] + 2.0 * np.dot(w[1:], g[1:m + 1])
            sq[gi] += (est / sigma2 - 1.0) ** 2
    mse = sq / R
    k1 = KernelSpec(kernel, 1)
    return BandwidthStudy(T, tuple(grid), tuple(float(v) for v in mse), grid[int(np.argmin(mse))],
                          mse_optimal_bandwidth(k1, sigma2 ** 2, delta1, T),
                          optimal_bandwidth(k1, sigma2 ** 2, delta1, T))


# ----------------------------------------------------------------------------
# table emission


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_table(t: ResultTable, fmt: str = "csv") -> str:
    """Serialize ``t`` as csv (lossless), json (lossless) or markdown (pivoted by N)."""
    if fmt == "json":
        return json.dumps(t.to_dict(), indent=2, sort_keys=True) + "\n"
    metrics = t.metric_names()
    if fmt == "csv":
        cols = list(KEY_FIELDS) + [c for m in metrics for c in (m, f"{m}_se")] + ["R_mc"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in t.rows:
            flat = row.flat()
            w.writerow([_fmt(flat.get(c, float("nan"))) for c in cols])
        return buf.getvalue()
    if fmt == "markdown":
        return _markdown(t, metrics)
    raise ValueError(f"unknown format {fmt!r}")


def _markdown(t: ResultTable, metrics: list[str]) -> str:
    Ns = sorted({r.key["N"] for r in t.rows})
    head = "| rho_nu | case | scenario | metric | T | " + " | ".join(f"N={n}" for n in Ns) + " |"
    sep = "|" + "---|" * (5 + len(Ns))
    lines = [head, sep]
    groups: dict[tuple, dict] = {}
    for r in t.rows:
        for m in metrics:
            if m not in r.values:
                continue
            gk = (r.key["rho_nu"], r.key["case"], r.key["scenario"], m, r.key["T"])
            groups.setdefault(gk, {})[r.key["N"]] = r.values[m]
    for gk in sorted(groups, key=lambda g: (g[0], g[1], metrics.index(g[3]), g[2], g[4])):
        cells = [f"{groups[gk][n]:.3f}" if n in groups[gk] else "" for n in Ns]
        lines.append("| " + " | ".join(str(v) for v in gk) + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
