"""JSON experiment configuration for the command-line harness.

A config file fully determines an experiment::

    {
      "experiment": "digital-pooled",
      "algorithm": "tabular_pr",
      "env": {"kind": "digital", "n_states": 20, "n_agents": 20, "seed": 7},
      "params": {
        "kappa": 1.0,
        "epochs": 500,
        "schedule": {"mode": "polynomial", "a": 1.0, "b": 1.0,
                      "tau1": 0.65, "tau2": 0.35},
        "adjacency": {"level": 1, "mode": "custom_digital"},
        "graph": {"mode": "complete"}
      },
      "seeds": [0, 1, 2],
      "output_dir": "runs/digital-pooled"
    }

``params`` carries estimator keyword arguments; ``schedule``,
``adjacency`` and ``graph`` sub-objects are translated to their config
dataclasses.  Unknown fields anywhere raise :class:`ConfigError` naming
the offending field, so typos fail loudly instead of silently running a
default.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .adjacency import AdjacencyConfig
from .deep import DeepPR
from .environments import POINT_MASS, EnvSpec
from .errors import ConfigError
from .graphs import GRAPH_MODES
from .schedules import ScheduleConfig
from .tabular import IQLearner, TabularPR

__all__ = ["ExperimentConfig", "ALGORITHMS"]

ALGORITHMS = ("iql", "tabular_pr", "deep_pr")

_SCHEDULE_FIELDS = {f.name for f in dataclasses.fields(ScheduleConfig)}
_ADJACENCY_FIELDS = {f.name for f in dataclasses.fields(AdjacencyConfig)}
_GRAPH_KEYS = {"mode", "p"}
# keyword arguments accepted by the estimators, minus random_state (owned
# by the per-run seed) and the sub-objects handled above
_TABULAR_KEYS = {
    "gamma", "epsilon", "epochs", "inner_steps", "q_init", "temperature",
    "snapshot_interval", "compute_oracle_gap",
}
_PR_KEYS = _TABULAR_KEYS | {"kappa"}
_DEEP_KEYS = {
    "kappa", "gamma", "actor_lr", "critic_lr", "soft_update_rate",
    "exploration_noise", "adjacency_epsilon", "batch_size",
    "buffer_capacity", "epochs", "inner_steps", "hidden",
    "divergence_threshold",
}


def _check_keys(given, allowed, where):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(
            f"{where}: unknown field(s) {unknown}; allowed: "
            f"{sorted(allowed)}")


@dataclasses.dataclass
class ExperimentConfig:
    experiment: str
    algorithm: str
    env: EnvSpec
    params: dict
    seeds: tuple
    output_dir: str

    # -- construction ----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config root: expected an object, "
                              f"got {type(data).__name__}")
        _check_keys(data, {"experiment", "algorithm", "env", "params",
                           "seeds", "output_dir"}, "config root")
        for key in ("experiment", "algorithm", "env", "seeds",
                    "output_dir"):
            if key not in data:
                raise ConfigError(f"config root: missing field {key!r}")
        algorithm = data["algorithm"]
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: expected one of {ALGORITHMS}, "
                              f"got {algorithm!r}")
        if not isinstance(data["experiment"], str) or not data["experiment"]:
            raise ConfigError("experiment: expected a non-empty string")
        if not isinstance(data["env"], dict):
            raise ConfigError("env: expected an object")
        env = EnvSpec.from_dict(data["env"])
        seeds = data["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) and not isinstance(s, bool)
                           and s >= 0 for s in seeds)):
            raise ConfigError("seeds: expected a non-empty list of "
                              "non-negative integers")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds: duplicate entries")
        if not isinstance(data["output_dir"], str) or not data["output_dir"]:
            raise ConfigError("output_dir: expected a non-empty string")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params: expected an object")
        cfg = cls(experiment=data["experiment"], algorithm=algorithm,
                  env=env, params=dict(params), seeds=tuple(seeds),
                  output_dir=data["output_dir"])
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: "
                              f"{exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: "
                              f"{exc}") from exc
        return cls.from_dict(data)

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        params = self.params
        if self.algorithm == "deep_pr":
            if self.env.kind != POINT_MASS:
                raise ConfigError(
                    f"deep_pr requires env.kind {POINT_MASS!r}, "
                    f"got {self.env.kind!r}")
            _check_keys(params, _DEEP_KEYS, "params")
            for key in ("schedule", "adjacency", "graph"):
                if key in params:
                    raise ConfigError(f"params.{key} does not apply to "
                                      "deep_pr")
        else:
            if self.env.kind == POINT_MASS:
                raise ConfigError(f"{self.algorithm} cannot run on the "
                                  "continuous point_mass env")
            allowed = (_PR_KEYS if self.algorithm == "tabular_pr"
                       else _TABULAR_KEYS)
            extra = {"schedule"} | ({"adjacency", "graph"}
                                    if self.algorithm == "tabular_pr"
                                    else set())
            _check_keys(params, allowed | extra, "params")
            if "schedule" in params:
                if not isinstance(params["schedule"], dict):
                    raise ConfigError("params.schedule: expected an object")
                _check_keys(params["schedule"], _SCHEDULE_FIELDS,
                            "params.schedule")
            if "adjacency" in params:
                if not isinstance(params["adjacency"], dict):
                    raise ConfigError("params.adjacency: expected an object")
                _check_keys(params["adjacency"], _ADJACENCY_FIELDS,
                            "params.adjacency")
            if "graph" in params:
                graph = params["graph"]
                if not isinstance(graph, dict):
                    raise ConfigError("params.graph: expected an object")
                _check_keys(graph, _GRAPH_KEYS, "params.graph")
                if graph.get("mode") not in GRAPH_MODES:
                    raise ConfigError(
                        f"params.graph.mode: expected one of {GRAPH_MODES},"
                        f" got {graph.get('mode')!r}")
        # instantiating the estimator validates the scalar parameters
        self.build_estimator(self.seeds[0])._validate()

    # -- factories --------------------------------------------------------
    def build_env(self):
        return self.env.build()

    def build_estimator(self, seed: int):
        params = dict(self.params)
        if self.algorithm == "deep_pr":
            if "hidden" in params:
                params["hidden"] = tuple(params["hidden"])
            return DeepPR(random_state=seed, **params)
        schedule = params.pop("schedule", None)
        if schedule is not None:
            schedule = ScheduleConfig(**schedule)
        if self.algorithm == "iql":
            return IQLearner(random_state=seed, schedule=schedule, **params)
        adjacency = params.pop("adjacency", None)
        if adjacency is not None:
            adjacency = AdjacencyConfig(**adjacency)
        graph = params.pop("graph", None) or {}
        return TabularPR(random_state=seed, schedule=schedule,
                         adjacency=adjacency,
                         graph_mode=graph.get("mode", "complete"),
                         graph_p=graph.get("p"), **params)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "algorithm": self.algorithm,
            "env": self.env.to_dict(),
            "params": dict(self.params),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         sort_keys=True) + "\n")
