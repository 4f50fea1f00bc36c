import filecmp
import json

import numpy as np
import pytest

from policy_reciprocity.cli import main
from policy_reciprocity.config import ExperimentConfig
from policy_reciprocity.errors import ConfigError
from policy_reciprocity.runner import resolve_output_dir
from policy_reciprocity.tabular import TabularPR


def _tabular_dict(**overrides):
    data = {
        "experiment": "smoke",
        "algorithm": "tabular_pr",
        "env": {"kind": "digital", "n_states": 6, "n_agents": 3, "seed": 5},
        "params": {
            "kappa": 1.0,
            "epochs": 8,
            "inner_steps": 10,
            "snapshot_interval": 4,
            "schedule": {"mode": "polynomial", "a": 1.0, "b": 1.0,
                         "tau1": 0.65, "tau2": 0.35},
            "adjacency": {"level": 1, "mode": "custom_digital"},
            "graph": {"mode": "complete"},
        },
        "seeds": [0, 1],
        "output_dir": "runs/smoke",
    }
    data.update(overrides)
    return data


def _write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_round_trip_through_dict():
    cfg = ExperimentConfig.from_dict(_tabular_dict())
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_unknown_field_rejected_at_each_level():
    for mutate, fragment in [
        (lambda d: d.update(extra=1), "config root"),
        (lambda d: d["params"].update(learning_rate=0.1), "params"),
        (lambda d: d["params"]["schedule"].update(warmup=5),
         "params.schedule"),
        (lambda d: d["params"]["adjacency"].update(radius=2),
         "params.adjacency"),
        (lambda d: d["params"]["graph"].update(degree=3), "params.graph"),
        (lambda d: d["env"].update(gravity=9.8), "env"),
    ]:
        data = _tabular_dict()
        mutate(data)
        with pytest.raises(ConfigError, match=fragment):
            ExperimentConfig.from_dict(data)


def test_seed_list_validation():
    with pytest.raises(ConfigError, match="duplicate"):
        ExperimentConfig.from_dict(_tabular_dict(seeds=[0, 0]))
    with pytest.raises(ConfigError, match="seeds"):
        ExperimentConfig.from_dict(_tabular_dict(seeds=[]))
    with pytest.raises(ConfigError, match="seeds"):
        ExperimentConfig.from_dict(_tabular_dict(seeds=[True]))
    with pytest.raises(ConfigError, match="seeds"):
        ExperimentConfig.from_dict(_tabular_dict(seeds=[-1]))


def test_algorithm_env_pairing():
    bad = _tabular_dict(algorithm="deep_pr")
    bad["params"] = {"epochs": 2}
    with pytest.raises(ConfigError, match="point_mass"):
        ExperimentConfig.from_dict(bad)

    bad = _tabular_dict(env={"kind": "point_mass", "n_agents": 2, "seed": 0})
    with pytest.raises(ConfigError, match="point_mass"):
        ExperimentConfig.from_dict(bad)


def test_deep_rejects_tabular_subobjects():
    data = {
        "experiment": "d", "algorithm": "deep_pr",
        "env": {"kind": "point_mass", "n_agents": 2, "seed": 0},
        "params": {"schedule": {"mode": "constant"}},
        "seeds": [0], "output_dir": "runs/d",
    }
    with pytest.raises(ConfigError, match="schedule"):
        ExperimentConfig.from_dict(data)


def test_scalar_params_validated_via_estimator():
    data = _tabular_dict()
    data["params"]["kappa"] = 2.0
    with pytest.raises(ConfigError, match="kappa"):
        ExperimentConfig.from_dict(data)


def test_build_estimator_maps_subobjects():
    cfg = ExperimentConfig.from_dict(_tabular_dict())
    est = cfg.build_estimator(seed=3)
    assert isinstance(est, TabularPR)
    assert est.random_state == 3
    assert est.schedule.tau1 == 0.65
    assert est.adjacency.level == 1
    assert est.graph_mode == "complete"


def test_load_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        ExperimentConfig.load(path)
    with pytest.raises(ConfigError, match="read"):
        ExperimentConfig.load(tmp_path / "absent.json")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_cli_validate_ok(tmp_path, capsys):
    path = _write_config(tmp_path, _tabular_dict())
    assert main(["validate", str(path)]) == 0
    assert "OK:" in capsys.readouterr().out


def test_cli_validate_bad_config_exits_2(tmp_path, capsys):
    data = _tabular_dict()
    data["params"]["typo_field"] = 1
    path = _write_config(tmp_path, data)
    assert main(["validate", str(path)]) == 2
    assert "typo_field" in capsys.readouterr().err


def test_cli_run_writes_artifacts_and_is_reproducible(tmp_path, capsys):
    path = _write_config(tmp_path, _tabular_dict())
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", str(path), "--output-dir", str(out_a)]) == 0
    assert main(["run", str(path), "--output-dir", str(out_b)]) == 0
    capsys.readouterr()

    for out in (out_a, out_b):
        assert (out / "config_echo.json").exists()
        assert (out / "summary.json").exists()
        for seed in (0, 1):
            seed_dir = out / f"seed_{seed}"
            assert (seed_dir / "metrics.csv").exists()
            assert (seed_dir / "q_tables.json").exists()
            assert (seed_dir / "snapshots.npz").exists()

    # same config, same seeds: artifacts must match byte for byte
    for seed in (0, 1):
        assert filecmp.cmp(out_a / f"seed_{seed}" / "metrics.csv",
                           out_b / f"seed_{seed}" / "metrics.csv",
                           shallow=False)
    assert filecmp.cmp(out_a / "summary.json", out_b / "summary.json",
                       shallow=False)

    summary = json.loads((out_a / "summary.json").read_text())
    assert summary["n_seeds"] == 2
    assert len(summary["per_seed"]) == 2
    assert np.isfinite(summary["mean_final_mean_return"])


def test_cli_compare(tmp_path, capsys):
    path = _write_config(tmp_path, _tabular_dict())
    out = tmp_path / "cmp"
    assert main(["run", str(path), "--output-dir", str(out)]) == 0
    capsys.readouterr()

    assert main(["compare", str(out / "seed_0"), str(out / "seed_0")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "epoch,sup_norm_gap"
    assert all(line.endswith(",0.0") for line in lines[1:])

    assert main(["compare", str(out / "seed_0"), str(out / "seed_1")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    gaps = [float(line.split(",")[1]) for line in lines[1:]]
    assert max(gaps) > 0


def test_cli_compare_missing_run_exits_1(tmp_path, capsys):
    assert main(["compare", str(tmp_path / "x"), str(tmp_path / "y")]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_oracle(tmp_path, capsys):
    path = _write_config(tmp_path, _tabular_dict())
    out = tmp_path / "oracle.json"
    assert main(["oracle", str(path), "--gamma", "0.8",
                 "--out", str(out)]) == 0
    assert "sweeps" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert payload["gamma"] == 0.8
    assert np.asarray(payload["q"]).shape == (6, 2)


def test_cli_run_deep(tmp_path, capsys):
    data = {
        "experiment": "deep-smoke", "algorithm": "deep_pr",
        "env": {"kind": "point_mass", "n_agents": 2, "seed": 0},
        "params": {"epochs": 2, "inner_steps": 20, "batch_size": 16,
                   "hidden": [8]},
        "seeds": [0], "output_dir": "unused",
    }
    path = _write_config(tmp_path, data)
    out = tmp_path / "deep"
    assert main(["run", str(path), "--output-dir", str(out)]) == 0
    capsys.readouterr()
    with np.load(out / "seed_0" / "weights.npz") as weights:
        assert {"actor_0", "actor_1", "critic_0", "critic_1"} \
            <= set(weights.files)


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("PRX_OUTPUT_ROOT", str(tmp_path))
    assert resolve_output_dir("runs/x") == tmp_path / "runs" / "x"
    assert resolve_output_dir(str(tmp_path / "abs")) == tmp_path / "abs"
    monkeypatch.delenv("PRX_OUTPUT_ROOT")
    assert not resolve_output_dir("runs/x").is_absolute()
