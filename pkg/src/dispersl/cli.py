"""Command-line entry point: ``dispersl {run,sweep-dt,sweep-h,verify,residual}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DisperslError, NumericalFailure
from .harness import (
    PLOT_SCRIPT,
    convergence_in_dt,
    convergence_in_h,
    fit_slope,
    load_config,
    residual_comparison,
    rows_to_csv,
    single_run,
    verify_properties,
    write_csv,
)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _emit(rows, spec, x_column: str, plot_script: str | None) -> int:
    if spec.output_path:
        write_csv(rows, spec.output_path)
        print(f"wrote {len(rows)} rows to {spec.output_path}")
    else:
        sys.stdout.write(rows_to_csv(rows))
    if plot_script:
        Path(plot_script).write_text(PLOT_SCRIPT, encoding="utf-8")
    errors = [r for r in rows if r.rel_l2_error is not None]
    if len(errors) >= 2:
        slope = fit_slope(errors, x_column, "rel_l2_error", tail=2)
        print(f"tail-2 slope of rel_l2_error vs {x_column}: {slope:.4f}")
    elif rows and rows[0].rel_l2_error is None:
        print("slope: absent (no reference solution)")
    else:
        print("slope: absent (fewer than two rows)")
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        print(f"row h={r.h:g} dt={r.dt:g}: {r.status}", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def _cmd_run(args) -> int:
    spec = replace(load_config(args.config), sweep="none")
    return _emit(single_run(spec), spec, "dt", args.plot_script)


def _cmd_sweep_dt(args) -> int:
    spec = load_config(args.config)
    return _emit(convergence_in_dt(spec), spec, "dt", args.plot_script)


def _cmd_sweep_h(args) -> int:
    spec = load_config(args.config)
    return _emit(convergence_in_h(spec), spec, "h", args.plot_script)


def _cmd_verify(args) -> int:
    report = verify_properties(args.seed)
    print(report.text())
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def _cmd_residual(args) -> int:
    if not args.nu > 0:
        raise ConfigError("--nu must be positive")
    rng = np.random.default_rng(args.seed)
    good, bad, scale = residual_comparison(args.nu, rng, args.points)
    print(f"cn^2 reference wave: max |residual| = {good:.3e} (scale nu*max|u_xxx| = {scale:.3e})")
    print(f"printed cn profile:  max |residual| = {bad:.3e}")
    return EXIT_OK if good <= 1e-6 * scale else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispersl",
        description="Semi-Lagrangian solver for periodic KdV-type equations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, helptext in (
        ("run", _cmd_run, "single run from a config file"),
        ("sweep-dt", _cmd_sweep_dt, "time-step convergence study"),
        ("sweep-h", _cmd_sweep_h, "coupled mesh refinement study"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="key=value configuration file")
        p.add_argument("--plot-script", help="also write a matplotlib script to this path")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the structural property checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("residual", help="PDE residual spot-check of the reference waves")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_residual)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DisperslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
