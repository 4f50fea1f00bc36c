"""``prx`` command-line harness.

Verbs::

    prx validate CONFIG            parse + validate a config, report OK
    prx run CONFIG [--output-dir]  run every seed, write artifacts
    prx compare DIR_A DIR_B        sup-norm gap between two runs' snapshots
    prx oracle CONFIG [--out F]    averaged-reward optimal tables for the
                                   config's env

Exit codes: 0 on success, 2 for configuration problems (bad JSON, unknown
fields, invalid values), 1 for runtime failures (divergence, missing
artifacts, I/O).  Relative output directories honor $PRX_OUTPUT_ROOT.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigError, ContractViolationError, UsageError
from .runner import compare_snapshots, oracle_report, run_experiment

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prx",
        description="multi-agent Q-learning with pooled value targets")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_validate = sub.add_parser("validate",
                                help="check a config file and exit")
    p_validate.add_argument("config", help="path to a JSON experiment "
                                           "config")

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--output-dir", default=None,
                       help="override the config's output_dir")

    p_cmp = sub.add_parser("compare",
                           help="table-snapshot gap between two runs")
    p_cmp.add_argument("run_a", help="seed directory of the first run")
    p_cmp.add_argument("run_b", help="seed directory of the second run")

    p_oracle = sub.add_parser(
        "oracle", help="averaged-reward optimal tables for a config's env")
    p_oracle.add_argument("config", help="path to a JSON experiment config")
    p_oracle.add_argument("--gamma", type=float, default=None,
                          help="discount override (default: the config's "
                               "gamma, else 0.8)")
    p_oracle.add_argument("--out", default=None,
                          help="write the optimal tables as JSON here")
    return parser


def _cmd_validate(args) -> int:
    config = ExperimentConfig.load(args.config)
    print(f"OK: {config.experiment} [{config.algorithm}] on "
          f"{config.env.kind}, {len(config.seeds)} seed(s)")
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    out_root, summary = run_experiment(config)
    keys = sorted(k for k in summary if k.startswith("mean_final_"))
    print(f"wrote {out_root}")
    for key in keys:
        value = summary[key]
        shown = "nan" if value is None else f"{value:.6g}"
        print(f"  {key[len('mean_final_'):]}: {shown}")
    return 0


def _cmd_compare(args) -> int:
    epochs, gaps = compare_snapshots(args.run_a, args.run_b)
    print("epoch,sup_norm_gap")
    for epoch, gap in zip(epochs, gaps):
        print(f"{int(epoch)},{float(gap)!r}")
    return 0


def _cmd_oracle(args) -> int:
    config = ExperimentConfig.load(args.config)
    gamma = args.gamma
    if gamma is None:
        gamma = float(config.params.get("gamma", 0.8))
    env, oracle = oracle_report(config.env, gamma)
    print(f"value iteration: {oracle.iterations} sweeps, final residual "
          f"{oracle.residual:.3e}")
    print(f"optimal value range: [{oracle.values.min():.6g}, "
          f"{oracle.values.max():.6g}]")
    if args.out:
        payload = {"gamma": gamma, "n_states": env.n_states,
                   "n_actions": env.n_actions,
                   "iterations": oracle.iterations,
                   "residual": oracle.residual,
                   "q": oracle.values.tolist()}
        Path(args.out).write_text(json.dumps(payload) + "\n")
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {"validate": _cmd_validate, "run": _cmd_run,
             "compare": _cmd_compare, "oracle": _cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ContractViolationError, OSError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
