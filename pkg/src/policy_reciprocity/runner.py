"""Experiment execution and on-disk artifacts.

A run writes, under ``<output_dir>/``:

* ``config_echo.json``   -- the parsed config, re-serialized
* ``summary.json``       -- final metrics per seed plus across-seed means
* ``seed_<s>/metrics.csv``    -- per-epoch history columns
* ``seed_<s>/q_tables.json``  -- learned tables (tabular algorithms)
* ``seed_<s>/weights.npz``    -- flat network parameters (deep algorithm)
* ``seed_<s>/snapshots.npz``  -- epoch-tagged table snapshots, when the
  estimator was configured with a ``snapshot_interval``

Float cells are written with ``repr`` round-trip precision so a re-run
with the same config produces byte-identical files.  Relative output
directories resolve against ``PRX_OUTPUT_ROOT`` when that environment
variable is set, else against the current working directory.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import UsageError
from .oracle import value_iteration_averaged

__all__ = ["resolve_output_dir", "run_experiment", "run_single",
           "compare_snapshots", "oracle_report"]

_TABULAR_COLUMNS = ("epoch", "mean_return", "consensus_error",
                    "max_oracle_gap")
_DEEP_COLUMNS = ("epoch", "mean_return", "td_loss", "actor_grad_norm")


def resolve_output_dir(output_dir: str) -> Path:
    """Anchor relative output dirs at $PRX_OUTPUT_ROOT when it is set."""
    path = Path(output_dir)
    if path.is_absolute():
        return path
    root = os.environ.get("PRX_OUTPUT_ROOT")
    return (Path(root) / path) if root else path


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_metrics(path: Path, history: dict, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        n_rows = len(history[columns[0]])
        for row in range(n_rows):
            writer.writerow([_fmt(history[col][row]) for col in columns])


def _json_safe(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _write_tables(path: Path, estimator) -> None:
    tables = [np.asarray(t.values).tolist() for t in estimator.q_tables_]
    payload = {"n_agents": len(tables), "q": tables}
    path.write_text(json.dumps(payload) + "\n")


def _write_weights(path: Path, estimator) -> None:
    arrays = {}
    for i, actor in enumerate(estimator.actors_):
        arrays[f"actor_{i}"] = actor.get_flat()
    for i, critic in enumerate(estimator.critics_):
        arrays[f"critic_{i}"] = critic.get_flat()
    np.savez(path, **arrays)


def _write_snapshots(path: Path, snapshots) -> None:
    if not snapshots:
        return
    epochs = np.array([e for e, _ in snapshots], dtype=np.int64)
    first = snapshots[0][1]
    if isinstance(first, np.ndarray):
        tables = np.stack([t for _, t in snapshots])
        np.savez(path, epochs=epochs, tables=tables)
    else:  # heterogeneous local tables: one array per (snapshot, agent)
        arrays = {"epochs": epochs}
        for k, (epoch, table_list) in enumerate(snapshots):
            for i, table in enumerate(table_list):
                arrays[f"snap_{k}_agent_{i}"] = table
        np.savez(path, **arrays)


def run_single(config: ExperimentConfig, seed: int, out_dir: Path):
    """Fit one seed of an experiment and write its artifacts."""
    out_dir.mkdir(parents=True, exist_ok=True)
    env = config.build_env()
    estimator = config.build_estimator(seed).fit(env)
    is_deep = config.algorithm == "deep_pr"
    columns = _DEEP_COLUMNS if is_deep else _TABULAR_COLUMNS
    _write_metrics(out_dir / "metrics.csv", estimator.history_, columns)
    if is_deep:
        _write_weights(out_dir / "weights.npz", estimator)
    else:
        _write_tables(out_dir / "q_tables.json", estimator)
        _write_snapshots(out_dir / "snapshots.npz", estimator.snapshots_)
    return estimator


def run_experiment(config: ExperimentConfig, echo=print):
    """Run every seed of an experiment; returns (output_dir, summary)."""
    out_root = resolve_output_dir(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    config.save(out_root / "config_echo.json")
    is_deep = config.algorithm == "deep_pr"
    columns = _DEEP_COLUMNS if is_deep else _TABULAR_COLUMNS
    finals = {col: [] for col in columns if col != "epoch"}
    per_seed = []
    for seed in config.seeds:
        estimator = run_single(config, seed, out_root / f"seed_{seed}")
        entry = {"seed": seed}
        for col in finals:
            value = float(estimator.history_[col][-1])
            finals[col].append(value)
            entry[f"final_{col}"] = _json_safe(value)
        entry["max_abs_q"] = estimator.max_abs_q_
        entry["q_bound"] = estimator.q_bound_
        per_seed.append(entry)
        echo(f"seed {seed}: " + "  ".join(
            f"{col}={finals[col][-1]:.6g}" for col in finals))
    summary = {
        "experiment": config.experiment,
        "algorithm": config.algorithm,
        "n_seeds": len(config.seeds),
        "per_seed": per_seed,
    }
    for col, values in finals.items():
        arr = np.asarray(values)
        mean = float(np.mean(arr)) if np.all(np.isfinite(arr)) \
            else float("nan")
        summary[f"mean_final_{col}"] = _json_safe(mean)
    (out_root / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out_root, summary


def _load_snapshots(run_dir: Path):
    path = Path(run_dir) / "snapshots.npz"
    if not path.exists():
        raise UsageError(
            f"{path} not found; re-run with a nonzero snapshot_interval")
    with np.load(path) as data:
        if "tables" not in data:
            raise UsageError(f"{path} holds per-agent local tables, which "
                             "compare does not support")
        return data["epochs"].copy(), data["tables"].copy()


def compare_snapshots(run_dir_a, run_dir_b):
    """Sup-norm gap between two runs' table snapshots, epoch by epoch.

    Returns (epochs, gaps) over the epochs both runs recorded.
    """
    epochs_a, tables_a = _load_snapshots(Path(run_dir_a))
    epochs_b, tables_b = _load_snapshots(Path(run_dir_b))
    common, idx_a, idx_b = np.intersect1d(epochs_a, epochs_b,
                                          return_indices=True)
    if common.size == 0:
        raise UsageError("the two runs share no snapshot epochs")
    if tables_a.shape[1:] != tables_b.shape[1:]:
        raise UsageError(
            f"snapshot shapes differ: {tables_a.shape[1:]} vs "
            f"{tables_b.shape[1:]}")
    diff = np.abs(tables_a[idx_a] - tables_b[idx_b])
    gaps = diff.reshape(common.size, -1).max(axis=1)
    return common, gaps


def oracle_report(env_spec, gamma: float):
    """Averaged-reward optimal tables for a tabular env spec."""
    env = env_spec.build()
    if not env.is_shared_chain:
        raise UsageError("the oracle verb only supports the shared-chain "
                         "digital env")
    oracle = value_iteration_averaged(env.model, gamma)
    return env, oracle
