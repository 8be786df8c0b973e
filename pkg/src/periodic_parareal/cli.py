"""Command-line front end for the experiment harness.

Subcommands: ``sweep`` (convergence factors vs. bound), ``costs`` (solve-count
comparison of the three solution routes), ``signals`` (input waveform plot)
and ``single`` (one periodic solve with a full iterate dump).

Exit codes: 0 on success, 2 on configuration errors, 3 when ``single
--strict`` hits a non-converged solve.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    ExperimentConfig,
    plot_signals,
    run_convergence_sweep,
    run_cost_comparison,
    run_single,
)

__all__ = ["main", "entry"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="periodic-parareal",
        description="Time-parallel periodic solver experiments for switching-input circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep", "convergence factor and bound across coarse steps"),
        ("costs", "solve-count comparison of sequential, classical and periodic runs"),
        ("signals", "plot one period of the PWM input and the smooth surrogates"),
        ("single", "one periodic solve with full iterate dump"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None, help="key=value config file")
        cmd.add_argument("--out", type=Path, default=None, help="output directory (default out/<command>)")
        cmd.add_argument("--workers", type=int, default=1, help="concurrent sweep points / fine solves")
        cmd.add_argument("--seed", type=int, default=None, help="seed for any randomized estimators")
        if name == "single":
            cmd.add_argument("--strict", action="store_true", help="exit 3 if the solve does not converge")
    return parser


def _load_config(args) -> ExperimentConfig:
    from dataclasses import replace

    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out if args.out is not None else Path("out") / args.command
    try:
        if args.command == "sweep":
            rows = run_convergence_sweep(config, out_dir, workers=max(1, args.workers))
            bad = [r for r in rows if not r.converged]
            print(f"wrote {out_dir}/sweep.csv ({len(rows)} rows, {len(bad)} non-converged)")
        elif args.command == "costs":
            rows = run_cost_comparison(config, out_dir)
            summary = ", ".join(f"{r.method}={r.effective_solves}" for r in rows)
            print(f"wrote {out_dir}/costs.csv ({summary})")
        elif args.command == "signals":
            path = plot_signals(config, out_dir)
            print(f"wrote {path}")
        else:
            run = run_single(config, out_dir)
            status = f"converged in {run.converged_at} iterations" if run.converged else "did not converge"
            print(f"wrote {out_dir}/iterates.csv ({status})")
            if args.strict and not run.converged:
                return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
