"""Command-line front end: ``ris-outmin run``.

Writes ``trace.csv`` (solver iterations), ``report.json`` (Monte Carlo
estimates, config echo and version) and ``sweep.csv`` (one row per sweep cell,
or a single row for a plain run) into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMES, ConfigError, RunConfig, parse_config, render_config
from .evaluation import SWEEP_AXES, SWEEP_COLUMNS, run_once, sweep


def version_string():
    """Package version with the short commit hash when run from a git checkout."""
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    commit = out.stdout.strip()
    return f"{__version__}+g{commit}" if out.returncode == 0 and commit else __version__


def parse_sweep(spec):
    """``AXIS=lo:hi:steps`` -> ``(axis, values)`` with ``steps`` evenly spaced points."""
    try:
        axis, rng = spec.split("=", 1)
        lo, hi, steps = rng.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise ConfigError(f"bad --sweep {spec!r}; expected AXIS=lo:hi:steps") from None
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if steps < 1:
        raise ConfigError("sweep steps must be positive")
    values = np.linspace(lo, hi, steps).tolist()
    return axis, values


def _schemes(args, run):
    if args.schemes:
        names = [s.strip() for s in args.schemes.split(",") if s.strip()]
    else:
        names = [run.scheme]
    for name in names:
        if name not in SCHEMES:
            raise ConfigError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    return names


def build_run_config(args):
    text = Path(args.config).read_text() if args.config else ""
    run = parse_config(text)
    overrides = {}
    if args.scheme is not None:
        overrides["scheme"] = args.scheme
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.mc is not None:
        overrides["mc_samples"] = args.mc
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    return RunConfig(**{**run.__dict__, **overrides})


def _config_echo(run):
    # the output path is not part of the experiment, so reports compare equal across directories
    lines = render_config(run).splitlines(keepends=True)
    return "".join(line for line in lines if not line.startswith("output_dir ="))


def _report_payload(run, scheme, trace, report):
    meta = {k: v for k, v in trace.meta.items() if isinstance(v, (int, float, str))}
    return {
        **report.to_dict(),
        "scheme": scheme,
        "iterations": len(trace),
        "final_objective": trace.objective_e[-1] if len(trace) else None,
        "trace_meta": meta,
        "config": _config_echo(run),
        "version": version_string(),
    }


def write_sweep(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row["axis"], repr(row["value"]), row["scheme"],
                             repr(row["max_outage"]), repr(row["min_eff_rate"]), repr(row["std_err"])])


def cmd_run(args):
    run = build_run_config(args)
    schemes = _schemes(args, run)
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")

    scheme = schemes[0]
    _, trace, report = run_once(run, scheme)
    trace.to_csv(out / "trace.csv")
    payload = _report_payload(run, scheme, trace, report)

    if args.sweep:
        axis, values = parse_sweep(args.sweep)
        rows = sweep(run, axis, values, schemes, reps=args.reps)
    else:
        rows = [{"axis": "none", "value": 0.0, "scheme": scheme, "max_outage": report.max_outage,
                 "min_eff_rate": report.min_eff_rate, "std_err": report.std_err}]
    write_sweep(out / "sweep.csv", rows)
    payload["sweep"] = [{k: row[k] for k in SWEEP_COLUMNS} for row in rows]
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ris-outmin", description="Blockage-robust RIS beamforming simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="train, evaluate and optionally sweep")
    run.add_argument("--config", metavar="PATH", help="flat key = value TOML config")
    run.add_argument("--scheme", choices=SCHEMES, help="scheme for the single run")
    run.add_argument("--schemes", help="comma-separated schemes for the sweep")
    run.add_argument("--sweep", metavar="AXIS=lo:hi:steps", help=f"sweep axis, one of {sorted(SWEEP_AXES)}")
    run.add_argument("--reps", type=int, default=1, help="scenario seeds pooled per sweep cell")
    run.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--mc", type=int, help="Monte Carlo evaluation samples")
    run.add_argument("--max-iter", type=int, help="solver iteration cap")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"ris-outmin: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failure
        print(f"ris-outmin: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
