"""Command-line entry point: ``panelinfer <subcommand> ...``.

Exit codes: 0 success, 1 statistical-input error, 2 usage error.  Every
subcommand is a thin adapter over library calls.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from typing import Sequence

import numpy as np

from . import _rng
from .bootstrap import DEFAULT_REPS, MultiplierError, MultiplierSpec
from .cce import CceError, CcePanelData, cce_heterogeneity_test
from .dgp import SpecError
from .grouping import GroupingError, group_panel
from .harness import ConfigError, emit_table, preset_grid, run_grid
from .homogeneity import StageError, infer_common_mean, infer_unit_means, test_homogeneity
from .longrun import BandwidthError, KernelSpec, default_bandwidth
from .panel import SCHEMA_VERSION, PanelError, dependence_summary, load_panel

INPUT_ERRORS = (PanelError, SpecError, BandwidthError, MultiplierError, StageError, CceError,
                GroupingError, ConfigError, OSError, json.JSONDecodeError)


class UsageError(Exception):
    pass


def _levels(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated numbers, got {text!r}") from None
    if not all(0.0 < v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("levels must lie in (0, 1)")
    return vals


def _seed(args) -> int:
    if args.seed is None:
        args.seed = _rng.entropy_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _kernel(args, T: int) -> KernelSpec:
    return KernelSpec(args.kernel, args.bandwidth or default_bandwidth(T))


def _write(text: str, dest: str | None) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(args):
    return load_panel(args.input, layout=args.layout, sidecar=args.sidecar)


# ----------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    p = _load(args)
    seed = _seed(args)
    k = _kernel(args, p.T)
    rep = test_homogeneity(p, k, args.reps, args.levels, seed, two_sided=not args.one_sided, center=args.center)
    out = rep.to_dict()
    out.update({"seed": seed, "input": args.input})
    _write(_json(out), args.out)
    if args.draws_csv:
        _write("draw\n" + "".join(f"{d!r}\n" for d in rep.draws.draws.tolist()), args.draws_csv)
    return 0


def cmd_infer(args) -> int:
    p = _load(args)
    seed = _seed(args)
    spec = MultiplierSpec(_kernel(args, p.T), p.T)
    rows = infer_unit_means(p, spec, args.reps, args.level, seed)
    if args.common:
        rows.append(infer_common_mean(p, spec, args.reps, args.level, seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "mean", "lower", "upper", "degenerate"])
    for r in rows:
        w.writerow([r.unit, repr(r.mean), repr(r.lower), repr(r.upper), int(r.degenerate)])
    _write(buf.getvalue(), args.out)
    print(f"level {args.level}, reps {args.reps}, seed {seed}", file=sys.stderr)
    return 0


def cmd_group(args) -> int:
    p = _load(args)
    seed = _seed(args)
    res = group_panel(p, args.jmax, args.rho, args.restarts, seed, args.method)
    out = res.to_dict(p.unit_ids)
    out.update({"schema_version": SCHEMA_VERSION, "seed": seed, "input": args.input})
    _write(_json(out), args.out)
    return 0


def cmd_cce(args) -> int:
    y = load_panel(args.y, layout=args.layout)
    ws = []
    for path in args.w.split(","):
        wp = load_panel(path, layout=args.layout)
        if wp.unit_ids != y.unit_ids or wp.time_ids != y.time_ids:
            raise PanelError(f"regressor file {path} has different unit or time labels from {args.y}")
        ws.append(wp.values)
    w = np.stack(ws, axis=2)
    missing = y.mask[:, :, None] & ~np.isfinite(w)
    if missing.any():
        i, t, j = np.argwhere(missing)[0]
        raise PanelError(f"regressor {j + 1} missing at unit {y.unit_ids[i]!r}, time {y.time_ids[t]!r}")
    seed = _seed(args)
    d = CcePanelData(y, np.where(y.mask[:, :, None], w, 0.0))
    rep = cce_heterogeneity_test(d, args.coef, _kernel(args, y.T), args.reps, args.levels, seed,
                                 reading=args.reading)
    out = rep.to_dict()
    out.update({"seed": seed, "y": args.y, "w": args.w.split(",")})
    _write(_json(out), args.out)
    return 0


def cmd_replicate(args) -> int:
    seed = _seed(args)
    override = {}
    if args.config:
        with open(args.config) as fh:
            override = json.load(fh)
        if not isinstance(override, dict):
            raise ConfigError("config override must be a JSON object")
    if args.reps is not None:
        override["R_mc"] = args.reps
    cells = preset_grid(args.experiment, args.scale, seed, **override)
    if args.cases:
        cells = [c for c in cells if c.case in args.cases]
    if args.scenarios:
        cells = [c for c in cells if c.scenario in args.scenarios]
    table = run_grid(cells, args.checkpoint_dir)
    _write(emit_table(table, args.format), args.out)
    return 0


def cmd_diagnose(args) -> int:
    p = _load(args)
    s = dependence_summary(p)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "p_tau"])
    for tau, share in s.curve():
        w.writerow([repr(tau), repr(share)])
    _write(buf.getvalue(), args.out)
    summary = {"schema_version": SCHEMA_VERSION, "rho_bar": s.rho_bar, "N": p.N, "T": p.T}
    if args.summary:
        _write(_json(summary), args.summary)
    else:
        print(f"rho_bar: {s.rho_bar!r}", file=sys.stderr)
    return 0


# ----------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _input_flags(sp) -> None:
    sp.add_argument("--input", required=True, help="panel CSV")
    sp.add_argument("--layout", choices=("long", "wide"), default="long")
    sp.add_argument("--sidecar", help="JSON file fixing unit and time label order")


def _kernel_flags(sp) -> None:
    sp.add_argument("--kernel", default="bartlett",
                    choices=("bartlett", "parzen", "tukey-hanning", "qs", "trapezoid"))
    sp.add_argument("--bandwidth", type=int, help="default floor(1.75 T^(1/3))")
    sp.add_argument("--reps", type=int, default=DEFAULT_REPS)
    sp.add_argument("--seed", type=int, help="master seed; drawn from entropy and echoed when absent")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="panelinfer", description="Inference on panel means under cross-sectional dependence.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("test", help="max-type homogeneity test of unit means")
    _input_flags(sp)
    _kernel_flags(sp)
    sp.add_argument("--levels", type=_levels, default=(0.90, 0.95, 0.99))
    sp.add_argument("--one-sided", action="store_true", help="signed maximum instead of absolute")
    sp.add_argument("--center", choices=("cross_section", "unit"), default="cross_section")
    sp.add_argument("--out", help="report JSON (stdout when absent)")
    sp.add_argument("--draws-csv", help="write the bootstrap draws as CSV")
    sp.set_defaults(fn=cmd_test)

    sp = sub.add_parser("infer", help="bootstrap confidence intervals for unit means")
    _input_flags(sp)
    _kernel_flags(sp)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--common", action="store_true", help="also report the common-mean interval")
    sp.add_argument("--out", help="CSV output (stdout when absent)")
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("group", help="latent groups of unit means")
    _input_flags(sp)
    sp.add_argument("--jmax", type=int, default=10)
    sp.add_argument("--rho", type=float, help="penalty per group; default 1/log(N+T)")
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--method", choices=("auto", "exact", "kmeans"), default="auto")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_group)

    sp = sub.add_parser("cce-test", help="slope heterogeneity test after CCE defactoring")
    sp.add_argument("--y", required=True)
    sp.add_argument("--w", required=True, help="comma-separated regressor CSVs")
    sp.add_argument("--layout", choices=("long", "wide"), default="long")
    sp.add_argument("--coef", type=int, default=1, help="1-based regressor index")
    sp.add_argument("--levels", type=_levels, default=(0.90, 0.95, 0.99))
    sp.add_argument("--reading", choices=("residual", "product"), default="residual")
    _kernel_flags(sp)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_cce)

    sp = sub.add_parser("replicate", help="Monte Carlo tables")
    sp.add_argument("--experiment", required=True, choices=("sim1", "sim2", "sim3", "prop3"))
    sp.add_argument("--scale", choices=("desk", "paper"), default="desk")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int, help="override R_mc")
    sp.add_argument("--cases", type=lambda s: [int(v) for v in s.split(",")])
    sp.add_argument("--scenarios", type=lambda s: s.split(","))
    sp.add_argument("--config", help="JSON object overriding config fields")
    sp.add_argument("--checkpoint-dir")
    sp.add_argument("--format", choices=("csv", "json", "markdown"), default="csv")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_replicate)

    sp = sub.add_parser("diagnose", help="cross-sectional dependence curve p(tau) and rho_bar")
    _input_flags(sp)
    sp.add_argument("--out", help="curve CSV (stdout when absent)")
    sp.add_argument("--summary", help="JSON with rho_bar")
    sp.set_defaults(fn=cmd_diagnose)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
