"""``qkdsync`` command line: run, figure, validate."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import sys

from . import config as cfgmod
from . import phys
from .decision import OUTCOMES
from .engine import correct_estimate, rows_to_csv, run_trials, sweep
from .scheduler import SchedulingError, build_scan_plan, validate_spacing

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFIG = 4
EXIT_SCHEDULE = 5

OUTCOME_COLUMNS = ("outcome", "count", "p_hat", "ci_low", "ci_high", "trials",
                   "mean_pe", "dark_hz", "N", "seed")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _header(command: str) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return f"# qkdsync {command} generated {stamp}\n"


def _write(text: str, out: str | None, command: str, timestamp: bool):
    body = (_header(command) if timestamp else "") + text
    if out in (None, "-"):
        sys.stdout.write(body)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(body)


def _load(path: str) -> cfgmod.ExperimentFile:
    with open(path) as fh:
        return cfgmod.loads(fh.read())


def _outcome_table(exp: cfgmod.ExperimentFile, estimates) -> str:
    c = exp.config
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OUTCOME_COLUMNS)
    for o in OUTCOMES:
        e = estimates[o]
        writer.writerow([o.value, e.count, repr(e.p_hat), repr(e.ci_low), repr(e.ci_high),
                         e.trials, repr(c.mean_pe), repr(c.spad.dark_count_rate_hz),
                         c.samples_per_window, exp.seed])
    return buf.getvalue()


def cmd_run(args) -> int:
    exp = _load(args.config)
    overrides = list(args.set or [])
    if args.trials is not None:
        overrides.append(f"trials={args.trials}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if overrides:
        exp = cfgmod.apply_overrides(exp, overrides)
    if exp.sweep:
        text = rows_to_csv(sweep(exp.config, exp.sweep, exp.trials, exp.seed,
                                 workers=args.workers))
    else:
        est = run_trials(exp.config, exp.trials, exp.seed, workers=args.workers)
        text = _outcome_table(exp, est)
        corr = correct_estimate(est)
        print(f"P(correct) = {corr.p_hat:.6f} [{corr.ci_low:.6f}, {corr.ci_high:.6f}] "
              f"over {exp.trials} trials", file=sys.stderr)
    _write(text, args.out or exp.output, "run", not args.no_timestamp)
    return EXIT_OK


def cmd_figure(args) -> int:
    exp = cfgmod.figure_experiment(args.figure, args.trials, args.seed)
    rows = sweep(exp.config, exp.sweep, exp.trials, exp.seed, workers=args.workers)
    _write(rows_to_csv(rows), args.out, f"figure {args.figure}", not args.no_timestamp)
    return EXIT_OK


def validation_report(exp: cfgmod.ExperimentFile) -> tuple[list[str], list]:
    c = exp.config
    speed = phys.propagation_speed(exp.c_vacuum_km_s, c.channel.refractive_index)
    plan = build_scan_plan(c.grid, c.spad, c.gates_per_frame, c.samples_per_window, check=False)
    violations = validate_spacing(plan, c.spad)
    lines = [
        f"name: {exp.name}",
        f"v_fiber_km_s: {speed:.6g}",
        f"min_period_ns: {phys.min_repetition_period(c.channel.length_km, speed):.6g}",
        f"transmittance: {phys.transmittance(c.channel):.6g}",
        f"window_width_ns: {c.grid.window_width_ns:g}",
        f"window_count: {c.grid.window_count}",
        f"frame_period_ns: {c.grid.frame_period_ns:.10g}",
        f"repetition_frequency_hz: {c.grid.repetition_frequency_hz:.6g}",
        f"mean_pe: {c.mean_pe:.6g}",
        f"gates_per_frame: {c.gates_per_frame}",
        f"samples_per_window: {c.samples_per_window}",
        f"scan_frames: {plan.frame_count}",
        f"scan_duration_ns: {plan.total_duration_ns:.6g}",
        f"spacing_violations: {len(violations)}"
        + (" (first two frames; the gap pattern repeats every frame)" if violations else ""),
    ]
    lines += [f"  - {v}" for v in violations[:10]]
    return lines, violations


def cmd_validate(args) -> int:
    exp = _load(args.config)
    lines, violations = validation_report(exp)
    report_stream = sys.stderr if args.emit_config == "-" else sys.stdout
    print("\n".join(lines), file=report_stream)
    if args.emit_config == "-":
        sys.stdout.write(exp.to_yaml())
    elif args.emit_config:
        with open(args.emit_config, "w") as fh:
            fh.write(exp.to_yaml())
    return EXIT_SCHEDULE if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkdsync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment file")
    run.add_argument("config")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config value, e.g. dark_hz=400 or spad.dead_time_ns=40")
    run.add_argument("--trials", type=_positive_int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--workers", type=_positive_int, default=1)
    run.add_argument("--no-timestamp", action="store_true")
    run.set_defaults(func=cmd_run)

    fig = sub.add_parser("figure", help="sweep one of the predefined figure grids")
    fig.add_argument("figure", type=int, choices=sorted(cfgmod.FIGURE_MEAN_PE))
    fig.add_argument("--trials", type=_positive_int, default=10000)
    fig.add_argument("--seed", type=int, default=0)
    fig.add_argument("--out")
    fig.add_argument("--workers", type=_positive_int, default=1)
    fig.add_argument("--no-timestamp", action="store_true")
    fig.set_defaults(func=cmd_figure)

    val = sub.add_parser("validate", help="print derived quantities without simulating")
    val.add_argument("config")
    val.add_argument("--emit-config", nargs="?", const="-", metavar="PATH",
                     help="write the normalized config (stdout if no path)")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"qkdsync: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except cfgmod.ConfigError as exc:
        print(f"qkdsync: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchedulingError as exc:
        print(f"qkdsync: schedule error: {exc}", file=sys.stderr)
        return EXIT_SCHEDULE


if __name__ == "__main__":
    sys.exit(main())
