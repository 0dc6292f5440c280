"""Command-line entry point: ``powercal {synth,run,converge,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import MAX_LEAD, MIN_LEAD
from .harness import DEFAULT_STRIDES, OnlineConfig, convergence_study, run_online
from .postprocessors import METHODS
from .synthgen import ScenarioConfig, generate, history

log = logging.getLogger("powercal")


def _int_list(text) -> list[int]:
    """``"1-5,10"`` -> ``[1, 2, 3, 4, 5, 10]``; JSON lists pass through."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return out


def _methods(text) -> list[str]:
    names = list(text) if isinstance(text, (list, tuple)) else [m.strip() for m in str(text).split(",") if m.strip()]
    unknown = [m for m in names if m not in METHODS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {unknown}; choose from {','.join(sorted(METHODS))}")
    return names


def _strides(text) -> dict[str, int]:
    if isinstance(text, dict):
        return {k: int(v) for k, v in text.items()}
    out = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        name, _, value = part.partition("=")
        if name.strip() not in METHODS or not value:
            raise argparse.ArgumentTypeError(f"bad stride {part!r}; expected method=N")
        out[name.strip()] = int(value)
    return out


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    p.add_argument("--config", type=Path, help="JSON file whose keys match flag names; flags given on the command line win")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="powercal", description="Post-processing of ensemble power forecasts.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{synth,run,converge,report}")

    p = sub.add_parser("synth", help="write a synthetic scenario as CSV files")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--n-dates", type=int, default=730, help="number of issue dates (default 730)")
    p.add_argument("--leads", type=_int_list, default=f"{MIN_LEAD}-{MAX_LEAD}",
                   help="lead times in days, e.g. 1-46 or 1,5,10 (default 1-46)")
    p.add_argument("--members", type=int, default=51, help="raw ensemble size (default 51)")
    p.add_argument("--bias", type=float, default=-5.0, help="additive member bias in MW (default -5)")
    p.add_argument("--deflation", type=float, default=0.5, help="member spread deflation in (0, 1] (default 0.5)")
    p.add_argument("--saturation-lead", type=int, default=15, help="lead where forecast skill stops decaying")
    p.add_argument("--history-years", type=int, default=30, help="years of observation history (default 30)")

    p = sub.add_parser("run", help="online post-processing with scores, reliability and calibrated output")
    _add_common(p)
    p.add_argument("--forecasts", type=Path, required=True, help="CSV issue_date,lead_days,member,value")
    p.add_argument("--obs", type=Path, required=True, help="CSV date,value")
    p.add_argument("--history", type=Path, help="observation history for climatology and bootstrap baselines")
    p.add_argument("--methods", type=_methods, default="emos,qr",
                   help=f"comma-separated subset of {','.join(sorted(METHODS))} (default emos,qr)")
    p.add_argument("--warmup", type=int, default=30, help="pairs seen before the first calibrated output (default 30)")
    p.add_argument("--grid-size", type=int, help="calibrated quantiles per forecast (default: raw member count)")
    p.add_argument("--leads", type=_int_list, help="restrict to these lead times")
    p.add_argument("--refit-stride", type=_strides,
                   help="refit every N dates per method, e.g. qrf=10,drn=5 (default "
                        + ",".join(f"{k}={v}" for k, v in DEFAULT_STRIDES.items()) + ")")
    p.add_argument("--reliability-step", type=float, default=0.05, help="quantile-level step of reliability tables")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("converge", help="mean CRPS against training-set size")
    _add_common(p)
    p.add_argument("--forecasts", type=Path, required=True, help="CSV issue_date,lead_days,member,value")
    p.add_argument("--obs", type=Path, required=True, help="CSV date,value")
    p.add_argument("--sizes", type=_int_list, default="30,60,120,250,500", help="training sizes (default 30,60,120,250,500)")
    p.add_argument("--methods", type=_methods, default="emos,qr", help="methods to compare (default emos,qr)")
    p.add_argument("--grid-size", type=int, help="calibrated quantiles per forecast")
    p.add_argument("--leads", type=_int_list, help="restrict to these lead times")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("report", help="print the tables in an output directory")
    _add_common(p)
    p.add_argument("--dir", type=Path, required=True, help="directory written by run or converge")
    return parser


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from ``--config``; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    if known.config is None or known.command not in choices:
        return parser.parse_args(argv)
    try:
        settings = json.loads(known.config.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {known.config}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{known.config}: invalid JSON ({exc})") from None
    if not isinstance(settings, dict):
        raise ValueError(f"{known.config}: expected a JSON object")
    subparser = choices[known.command]
    dests = {a.dest: a for a in subparser._actions}
    converted = {}
    for key, value in settings.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config", "help") or dest not in dests:
            raise ValueError(f"{known.config}: unknown setting {key!r} for '{known.command}'")
        action = dests[dest]
        if value is not None and action.type is not None:
            value = action.type(value if isinstance(value, (list, dict)) else str(value))
        converted[dest] = value
        action.required = False
    subparser.set_defaults(**converted)
    return parser.parse_args(argv)


def _cmd_synth(args) -> None:
    cfg = ScenarioConfig(n_dates=args.n_dates, leads=tuple(args.leads), n_members=args.members, bias=args.bias,
                         deflation=args.deflation, saturation_lead=args.saturation_lead, seed=args.seed)
    panel, obs, _ = generate(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_forecasts(args.out / "forecasts.csv", panel)
    io.write_observations(args.out / "obs.csv", obs)
    if args.history_years > 0:
        io.write_observations(args.out / "history.csv", history(cfg, args.history_years))
    print(f"wrote {len(panel)} forecasts and {len(obs)} observations to {args.out}")


def _cmd_run(args) -> None:
    manifest = io.RunManifest(
        forecasts=str(args.forecasts), obs=str(args.obs),
        history=None if args.history is None else str(args.history),
        methods=list(args.methods), warmup=args.warmup, grid_size=args.grid_size, seed=args.seed, out=str(args.out),
    )
    manifest.check_inputs()
    panel = io.load_forecasts(args.forecasts)
    obs = io.load_observations(args.obs)
    hist = io.load_observations(args.history) if args.history else None
    strides = dict(DEFAULT_STRIDES)
    strides.update(args.refit_stride or {})
    config = OnlineConfig(warmup=args.warmup, methods=tuple(args.methods), leads=tuple(args.leads) if args.leads else None,
                          seed=args.seed, grid_size=args.grid_size, refit_stride=strides,
                          reliability_step=args.reliability_step)
    result = run_online(panel, obs, config, history=hist)
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    grid_size = args.grid_size or panel.n_members
    levels = np.arange(1, grid_size + 1) / (grid_size + 1)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_scores(args.out / "scores.csv", result.scores)
    io.write_reliability(args.out / "reliability.csv", result.reliability)
    io.write_calibrated(args.out / "calibrated.csv", result.calibrated, levels)
    manifest.write(args.out)
    print(f"scored {len(result.scores)} (lead, method) rows; outputs in {args.out}")


def _cmd_converge(args) -> None:
    for path in (args.forecasts, args.obs):
        if not path.is_file():
            raise FileNotFoundError(f"file not found: {path}")
    panel = io.load_forecasts(args.forecasts)
    obs = io.load_observations(args.obs)
    curve = convergence_study(panel, obs, args.sizes, args.methods, seed=args.seed,
                              grid_size=args.grid_size, leads=args.leads)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_convergence(args.out / "convergence.csv", curve)
    print(f"wrote {len(curve)} rows to {args.out / 'convergence.csv'}")


def _print_table(title, columns, rows) -> None:
    print(title)
    if not rows:
        print("  (empty)\n")
        return
    cells = [[str(r[c]) for c in columns] for r in rows]
    for row in cells:
        for j, c in enumerate(row):
            try:
                row[j] = f"{float(c):.4f}" if "." in c or "e" in c.lower() or c == "nan" else c
            except ValueError:
                pass
    widths = [max(len(c), *(len(r[j]) for r in cells)) for j, c in enumerate(columns)]
    print("  " + "  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    for row in cells:
        print("  " + "  ".join(v.ljust(w) for v, w in zip(row, widths)))
    print()


def _cmd_report(args) -> None:
    if not args.dir.is_dir():
        raise FileNotFoundError(f"directory not found: {args.dir}")
    found = False
    scores = args.dir / "scores.csv"
    if scores.is_file():
        found = True
        _print_table("Scores by lead time", io.SCORE_COLUMNS, io.read_table(scores, io.SCORE_COLUMNS))
    rel = args.dir / "reliability.csv"
    if rel.is_file():
        found = True
        rows = io.read_table(rel, io.RELIABILITY_COLUMNS)
        worst = {}
        for r in rows:
            key = (int(r["lead_days"]), r["method"])
            worst[key] = max(worst.get(key, 0.0), abs(float(r["frequency"]) - float(r["quantile"])))
        summary = [{"lead_days": k[0], "method": k[1], "max_deviation": f"{v:.4f}"} for k, v in sorted(worst.items())]
        _print_table("Reliability: max |frequency - quantile|", ("lead_days", "method", "max_deviation"), summary)
    conv = args.dir / "convergence.csv"
    if conv.is_file():
        found = True
        _print_table("Mean CRPS by training size", io.CONVERGENCE_COLUMNS, io.read_table(conv, io.CONVERGENCE_COLUMNS))
    if not found:
        raise FileNotFoundError(f"no scores.csv, reliability.csv or convergence.csv in {args.dir}")


COMMANDS = {"synth": _cmd_synth, "run": _cmd_run, "converge": _cmd_converge, "report": _cmd_report}


def run_command(argv=None) -> int:
    """Run one CLI invocation and return its exit status."""
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    except (OSError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"powercal: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"powercal: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
