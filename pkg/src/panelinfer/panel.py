"""Panel container, CSV ingestion and cross-sectional dependence diagnostics."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

SCHEMA_VERSION = 1


class PanelError(ValueError):
    """Invalid panel contents or an operation the panel cannot support."""


class ParseError(PanelError):
    """Malformed tabular input; the message carries the offending location."""


@dataclass(frozen=True)
class Panel:
    """N x T observations, one row per unit.

    ``values`` holds NaN wherever ``mask`` is False.  Both arrays are made
    read-only on construction.
    """

    values: np.ndarray
    mask: np.ndarray
    unit_ids: tuple[str, ...]
    time_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise PanelError(f"values {values.shape} and mask {mask.shape} must be equal 2-d shapes")
        n, t = values.shape
        if len(self.unit_ids) != n or len(self.time_ids) != t:
            raise PanelError("label lengths do not match the value matrix")
        if not np.all(np.isfinite(values[mask])):
            i, j = np.argwhere(mask & ~np.isfinite(values))[0]
            raise PanelError(f"non-finite observed value at unit {self.unit_ids[i]!r}, time {self.time_ids[j]!r}")
        counts = mask.sum(axis=1)
        short = np.flatnonzero(counts < 2)
        if short.size:
            raise PanelError(f"unit {self.unit_ids[short[0]]!r} has {counts[short[0]]} observations; at least 2 required")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "unit_ids", tuple(str(u) for u in self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(str(s) for s in self.time_ids))

    @classmethod
    def from_array(cls, values, mask=None, unit_ids=None, time_ids=None) -> "Panel":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise PanelError("expected an N x T array")
        if mask is None:
            mask = np.isfinite(values)
        n, t = values.shape
        unit_ids = tuple(unit_ids) if unit_ids is not None else tuple(str(i) for i in range(1, n + 1))
        time_ids = tuple(time_ids) if time_ids is not None else tuple(str(s) for s in range(1, t + 1))
        return cls(values, mask, unit_ids, time_ids)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def is_balanced(self) -> bool:
        return bool(self.mask.all())

    @property
    def t_counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def require_balanced(self, what: str = "this operation") -> np.ndarray:
        if not self.is_balanced:
            raise PanelError(f"{what} requires a balanced panel; use the unbalanced variant")
        return self.values

    def unit_means(self) -> np.ndarray:
        return np.where(self.mask, self.values, 0.0).sum(axis=1) / self.t_counts

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.mask, self.values, fill)

    def subset(self, units: Sequence[int]) -> "Panel":
        idx = np.asarray(units, dtype=int)
        return Panel(self.values[idx], self.mask[idx], tuple(self.unit_ids[i] for i in idx), self.time_ids)

    def map_values(self, fn) -> "Panel":
        return Panel(fn(self.values), self.mask, self.unit_ids, self.time_ids)


# ----------------------------------------------------------------------------
# CSV I/O


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline=""), True
    return source, False


def _time_sort_key(labels: Sequence[str]):
    try:
        nums = {s: int(s) for s in labels}
        return lambda s: nums[s]
    except ValueError:
        pass
    try:
        nums_f = {s: float(s) for s in labels}
        return lambda s: nums_f[s]
    except ValueError:
        return lambda s: s


def _parse_float(text: str, where: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} at {where}") from None
    if not np.isfinite(val):
        raise ParseError(f"non-finite value {text!r} at {where}")
    return val


def _read_long(fh: IO[str]) -> tuple[list[str], list[str], dict[tuple[str, str], float]]:
    reader = csv.reader(fh)
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty input") from None
    try:
        iu, it, iv = header.index("unit"), header.index("time"), header.index("value")
    except ValueError:
        raise ParseError(f"long layout needs columns unit,time,value; got {header}") from None
    units: dict[str, None] = {}
    times: dict[str, None] = {}
    cells: dict[tuple[str, str], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        u, s, v = row[iu].strip(), row[it].strip(), row[iv].strip()
        if v == "":
            continue
        key = (u, s)
        if key in cells:
            raise ParseError(f"duplicate (unit, time) pair ({u}, {s}) at line {lineno}")
        cells[key] = _parse_float(v, f"line {lineno}, column 'value'")
        units.setdefault(u)
        times.setdefault(s)
    return list(units), list(times), cells


def _read_wide(fh: IO[str]) -> tuple[list[str], list[str], dict[tuple[str, str], float]]:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty input") from None
    times = header[1:]
    if len(set(times)) != len(times):
        raise ParseError("duplicate time labels in wide header")
    units: list[str] = []
    cells: dict[tuple[str, str], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        u = row[0].strip()
        if u in units:
            raise ParseError(f"duplicate unit {u!r} at line {lineno}")
        units.append(u)
        for s, v in zip(times, row[1:]):
            v = v.strip()
            if v and v.lower() not in {"na", "nan"}:
                cells[(u, s)] = _parse_float(v, f"line {lineno}, column {s!r}")
    return units, times, cells


def load_panel(source, layout: str = "long", sidecar=None) -> Panel:
    """Read a panel from a CSV path or text stream.

    ``layout`` is ``"long"`` (columns unit,time,value; a missing cell is an
    absent row) or ``"wide"`` (one row per unit, time labels in the header,
    blank cells missing).  An optional JSON sidecar fixes the unit and time
    label order.
    """
    if layout not in {"long", "wide"}:
        raise ValueError(f"unknown layout {layout!r}")
    fh, owned = _open_text(source)
    try:
        units, times, cells = (_read_long if layout == "long" else _read_wide)(fh)
    finally:
        if owned:
            fh.close()
    if sidecar is not None:
        with open(sidecar) as f:
            meta = json.load(f)
        units = [str(u) for u in meta.get("unit_ids", units)]
        times = [str(s) for s in meta.get("time_ids", times)]
    else:
        times = sorted(times, key=_time_sort_key(times))
    if not units:
        raise ParseError("no observations")
    urow = {u: i for i, u in enumerate(units)}
    tcol = {s: j for j, s in enumerate(times)}
    values = np.full((len(units), len(times)), np.nan)
    mask = np.zeros(values.shape, dtype=bool)
    for (u, s), v in cells.items():
        if u not in urow or s not in tcol:
            raise ParseError(f"cell ({u}, {s}) not listed in sidecar labels")
        values[urow[u], tcol[s]] = v
        mask[urow[u], tcol[s]] = True
    return Panel(values, mask, tuple(units), tuple(times))


def save_panel(p: Panel, dest, sidecar=None) -> None:
    """Write ``p`` in long layout; values use ``repr`` so reloads are bit-exact."""
    fh, owned = (open(dest, "w", newline=""), True) if isinstance(dest, (str, os.PathLike)) else (dest, False)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit", "time", "value"])
        for i, u in enumerate(p.unit_ids):
            for j in np.flatnonzero(p.mask[i]):
                writer.writerow([u, p.time_ids[j], repr(float(p.values[i, j]))])
    finally:
        if owned:
            fh.close()
    if sidecar is not None:
        with open(sidecar, "w") as f:
            json.dump({"schema_version": SCHEMA_VERSION, "unit_ids": list(p.unit_ids),
                       "time_ids": list(p.time_ids)}, f, indent=2)


def panel_to_csv_text(p: Panel) -> str:
    buf = io.StringIO()
    save_panel(p, buf)
    return buf.getvalue()


# ----------------------------------------------------------------------------
# dependence diagnostics


@dataclass(frozen=True)
class DependenceSummary:
    tau: np.ndarray
    p_tau: np.ndarray
    rho_bar: float
    corr: np.ndarray = field(repr=False)

    def curve(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.tau, self.p_tau)]


def correlation_matrix(p: Panel) -> np.ndarray:
    """Pearson correlations, pairwise-complete when the panel is unbalanced."""
    n = p.N
    stds = []
    for i in range(n):
        row = p.values[i, p.mask[i]]
        if np.ptp(row) == 0.0:
            raise PanelError(f"unit {p.unit_ids[i]!r} has zero variance")
        stds.append(row.std())
    if p.is_balanced:
        if p.T < 3:
            raise PanelError("dependence diagnostics need T >= 3")
        r = np.corrcoef(p.values)
    else:
        r = np.eye(n)
        for i in range(n):
            for j in range(i):
                both = p.mask[i] & p.mask[j]
                if both.sum() < 3:
                    r[i, j] = r[j, i] = np.nan
                    continue
                a, b = p.values[i, both], p.values[j, both]
                sa, sb = a.std(), b.std()
                r[i, j] = r[j, i] = 0.0 if sa == 0 or sb == 0 else np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def dependence_summary(p: Panel, tau_grid: Sequence[float] | None = None) -> DependenceSummary:
    """Share of pairwise |r_ij| above each threshold, and the mean absolute row sum.

    Computed on raw (not detrended) values.
    """
    tau = np.linspace(0.0, 1.0, 101) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    r = correlation_matrix(p)
    lower = np.abs(r[np.tril_indices(p.N, k=-1)])
    lower = lower[np.isfinite(lower)]
    if lower.size == 0:
        p_tau = np.zeros_like(tau)
    else:
        # sorted-search keeps the curve monotone for unsorted grids too
        srt = np.sort(lower)
        p_tau = (lower.size - np.searchsorted(srt, tau, side="right")) / lower.size
    rho_bar = float(np.nansum(np.abs(r)) / p.N)
    return DependenceSummary(tau, p_tau, rho_bar, r)
