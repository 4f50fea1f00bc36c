"""Tabular trainers: independent Q-learning and its reciprocity variant.

The reciprocity update augments the usual temporal-difference step with a
pull toward a pooled target built from neighbor tables:

    Q_i(s,a) <- Q_i(s,a) + alpha_k * [r_i + gamma * max_a' Q_i(s',a') - Q_i(s,a)]
                         + beta_k  * [Qstar_i(s,a) - Q_i(s,a)]

where ``k`` is the visit count of (s, a) and the pooled target mixes
same-state neighbor values with neighbor values aggregated over adjacent
states:

    Qstar_i(s,a) = (kappa/|N_i|)   * sum_{j in N_i} Q_j(s,a)
                 + ((1-kappa)/|N_i|) * sum_{j in N_i} Qsharp_j(s,a)

Pooled targets within an epoch are computed from the tables as they stood
at the epoch boundary, so all inner-loop updates in one epoch chase one
consistent target.

Both trainers are sklearn-style estimators: hyperparameters go to
``__init__`` verbatim, validation happens in ``fit``, and learned state
lands in trailing-underscore attributes.
"""
from __future__ import annotations

import logging
import warnings

import numpy as np
from sklearn.base import BaseEstimator

from .adjacency import (AdjacencyConfig, adjacency_weights,
                        build_adjacency_space, q_sharp)
from .errors import (ConfigError, ContractViolationError, DivergenceError,
                     EmptyNeighborhoodError, NoAdjacentStateError,
                     NotFittedError)
from .graphs import COMPLETE, ConnectivityGraph
from .mdp import QTable
from .oracle import value_iteration_averaged
from .schedules import ScheduleConfig, alpha_at, beta_at
from .validation import check_scalar

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# update rules
# ---------------------------------------------------------------------------

def iql_update(q: QTable, s: int, a: int, r: float, s_next: int,
               alpha: float, gamma: float) -> float:
    """Standard tabular Q-learning update; returns the new entry."""
    bootstrap = q.values[s_next].max()
    td = r + gamma * bootstrap - q.values[s, a]
    q.values[s, a] = q.values[s, a] + alpha * td
    q.visits[s, a] += 1
    return float(q.values[s, a])


def pr_update(q: QTable, s: int, a: int, r: float, s_next: int,
              q_star_value: float, alpha: float, beta: float,
              gamma: float) -> float:
    """Reciprocity update; with beta == 0 it reproduces ``iql_update``
    bit for bit (same expression, no extra arithmetic).

    The combined step is kept a stable interpolation by clipping beta to
    1 - alpha when alpha + beta would exceed 1 (with a warning): beyond
    that point the shrinkage factor on Q_i(s,a) flips sign.
    """
    if alpha + beta > 1.0:
        warnings.warn(
            f"alpha + beta = {alpha + beta:.6g} > 1; clipping beta to "
            f"{1.0 - alpha:.6g}", RuntimeWarning, stacklevel=2)
        beta = 1.0 - alpha
    old = q.values[s, a]
    bootstrap = q.values[s_next].max()
    td = r + gamma * bootstrap - old
    new = old + alpha * td
    if beta != 0.0:
        new = new + beta * (q_star_value - old)
    q.values[s, a] = new
    q.visits[s, a] += 1
    return float(new)


def epsilon_greedy(q_row, epsilon: float, rng: np.random.Generator) -> int:
    """With probability epsilon act uniformly, otherwise greedily
    (ties go to the lowest action index)."""
    q_row = np.asarray(q_row)
    if rng.random() < epsilon:
        return int(rng.integers(q_row.shape[0]))
    return int(np.argmax(q_row))


# ---------------------------------------------------------------------------
# pooled reciprocity target
# ---------------------------------------------------------------------------

def q_star(agent: int, tables, state: int, action: int, *, kappa: float,
           neighbors, adjacency: AdjacencyConfig, local_states) -> float:
    """Pooled target for one agent at one (state, action), scalar form.

    All tables must be indexed over the shared enumeration
    ``local_states`` (the shared-chain setting).  Peers whose adjacency
    space at the anchor is empty contribute only their same-state term,
    and the cross-state weight renormalizes over the peers that do
    contribute.  Raises :class:`EmptyNeighborhoodError` when ``neighbors``
    is empty and :class:`NoAdjacentStateError` when no peer contributes
    any information at all.
    """
    neighbors = list(neighbors)
    if not neighbors:
        raise EmptyNeighborhoodError(f"agent {agent} has no neighbors")
    check_scalar(kappa, "kappa", low=0.0, high=1.0)
    index_of = {ls.values: idx for idx, ls in enumerate(local_states)}
    anchor = local_states[state]
    space = build_adjacency_space(anchor, local_states, adjacency)

    same_state_mean = float(np.mean(
        [tables[j].values[state, action] for j in neighbors]))
    sharp_values = []
    for j in neighbors:
        table = tables[j]
        try:
            sharp_values.append(q_sharp(
                space,
                lambda ls, act: table.values[index_of[ls.values], act],
                action, adjacency.mode))
        except NoAdjacentStateError:
            continue
    kappa_mass = kappa
    sharp_mass = (1.0 - kappa) if sharp_values else 0.0
    total = kappa_mass + sharp_mass
    if total == 0.0:
        raise NoAdjacentStateError(
            f"no usable peer information for agent {agent} at state {state}")
    pooled = kappa_mass * same_state_mean
    if sharp_values:
        pooled += sharp_mass * float(np.mean(sharp_values))
    return pooled / total


def state_mixing_matrix(anchor_states, candidate_states,
                        cfg: AdjacencyConfig):
    """Row-stochastic cross-state weight matrix W plus availability flags.

    ``W[s] @ table[:, a]`` equals the adjacency aggregation of ``table``
    at anchor ``s``; rows whose adjacency space is empty are zero and
    flagged unavailable.
    """
    cfg.validate()
    index_of = {ls.values: idx for idx, ls in enumerate(candidate_states)}
    n_anchor, n_cand = len(anchor_states), len(candidate_states)
    w = np.zeros((n_anchor, n_cand))
    available = np.zeros(n_anchor, dtype=bool)
    for s, anchor in enumerate(anchor_states):
        space = build_adjacency_space(anchor, candidate_states, cfg)
        if len(space) == 0:
            continue
        weights = adjacency_weights(space, cfg.mode)
        for (member, _), weight in zip(space.members, weights):
            w[s, index_of[member.values]] += weight
        available[s] = True
    return w, available


# ---------------------------------------------------------------------------
# estimator base
# ---------------------------------------------------------------------------

class _TabularEstimatorBase(BaseEstimator):
    """Shared fit/predict plumbing for the two tabular trainers."""

    def _resolved_schedule(self) -> ScheduleConfig:
        schedule = self.schedule if self.schedule is not None \
            else ScheduleConfig()
        if not isinstance(schedule, ScheduleConfig):
            raise ConfigError("schedule: expected a ScheduleConfig")
        return schedule.validate()

    def _validate(self):
        """Check every constructor parameter without touching an env."""
        self._validate_common()
        self._resolved_schedule()

    def _validate_common(self):
        check_scalar(self.gamma, "gamma", low=0.0, high=1.0,
                     include_high=False)
        check_scalar(self.epsilon, "epsilon", low=0.0, high=1.0)
        check_scalar(self.epochs, "epochs", low=1, integral=True)
        check_scalar(self.inner_steps, "inner_steps", low=1, integral=True)
        check_scalar(self.q_init, "q_init", low=0.0)
        check_scalar(self.temperature, "temperature", low=0.0,
                     include_low=False)
        check_scalar(self.snapshot_interval, "snapshot_interval", low=0,
                     integral=True)
        if self.random_state is not None:
            check_scalar(self.random_state, "random_state", low=0,
                         integral=True)

    def _spawn_streams(self, env):
        """Seed the env and return (policy_ss, graph_rng, init_rng).

        The policy seed material is returned unspawned so the shared-chain
        path can turn it into one behavior stream and the heterogeneous
        path into one stream per agent.
        """
        root = np.random.SeedSequence(
            0 if self.random_state is None else self.random_state)
        env_ss, policy_ss, graph_ss, init_ss = root.spawn(4)
        env.seed(env_ss)
        return (policy_ss,
                np.random.default_rng(graph_ss),
                np.random.default_rng(init_ss))

    def _initial_tables(self, shapes, init_rng):
        tables = []
        for shape in shapes:
            if self.q_init > 0.0:
                tables.append(init_rng.uniform(-self.q_init, self.q_init,
                                               size=shape))
            else:
                tables.append(np.zeros(shape))
        return tables

    def _check_finite(self, arrays, epoch: int):
        for arr in arrays:
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(
                    f"non-finite Q value detected at epoch {epoch}",
                    epoch=epoch)

    def _check_fitted(self):
        if not hasattr(self, "q_tables_"):
            raise NotFittedError(
                f"{type(self).__name__} instance is not fitted yet")

    # -- prediction over fitted tables --------------------------------------
    def _rows_for(self, X):
        """Per-agent table rows for a batch of query states."""
        self._check_fitted()
        env = self.env_
        if env.is_shared_chain:
            states = np.asarray(X, dtype=np.int64).reshape(-1)
            if np.any(states < 0) or np.any(states >= env.n_states):
                raise ContractViolationError(
                    f"state indices must lie in [0, {env.n_states})")
            return [[table.values[s] for s in states]
                    for table in self.q_tables_]
        coords = np.asarray(X, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords[None, :]
        if coords.shape[1] != env.d:
            raise ContractViolationError(
                f"expected coordinate rows of length {env.d}, "
                f"got {coords.shape[1]}")
        rows = []
        for i, table in enumerate(self.q_tables_):
            obs = env.obs_matrices[i]
            agent_rows = []
            for row in coords:
                local = obs.observe(tuple(int(c) for c in row))
                agent_rows.append(table.values[env.local_index(i, local)])
            rows.append(agent_rows)
        return rows

    def predict(self, X):
        """Greedy actions, shape [n_queries, n_agents]."""
        rows = self._rows_for(X)
        out = np.array([[int(np.argmax(r)) for r in agent_rows]
                        for agent_rows in rows])
        return out.T

    def predict_proba(self, X):
        """Boltzmann action distributions, [n_queries, n_agents, n_actions]."""
        from .oracle import boltzmann_distribution
        rows = self._rows_for(X)
        out = np.array([[boltzmann_distribution(np.asarray(r),
                                                self.temperature)
                         for r in agent_rows] for agent_rows in rows])
        return np.transpose(out, (1, 0, 2))


# ---------------------------------------------------------------------------
# independent Q-learning
# ---------------------------------------------------------------------------

class IQLearner(_TabularEstimatorBase):
    """Independent per-agent tabular Q-learning (no table exchange).

    Parameters mirror the reciprocity trainer minus the pooling knobs, so
    seed-matched comparisons are exact: fitting with the same
    ``random_state`` consumes random streams identically.
    """

    def __init__(self, gamma: float = 0.8, epsilon: float = 1.0,
                 epochs: int = 2000, inner_steps: int = 25,
                 schedule: ScheduleConfig | None = None,
                 q_init: float = 0.0, temperature: float = 1.0,
                 snapshot_interval: int = 0, compute_oracle_gap: bool = True,
                 random_state: int | None = 0):
        self.gamma = gamma
        self.epsilon = epsilon
        self.epochs = epochs
        self.inner_steps = inner_steps
        self.schedule = schedule
        self.q_init = q_init
        self.temperature = temperature
        self.snapshot_interval = snapshot_interval
        self.compute_oracle_gap = compute_oracle_gap
        self.random_state = random_state

    def fit(self, env, y=None):
        self._validate()
        schedule = self._resolved_schedule()
        policy_ss, _graph_rng, init_rng = self._spawn_streams(env)
        if env.is_shared_chain:
            self._fit_shared(env, schedule,
                             np.random.default_rng(policy_ss), init_rng)
        else:
            self._fit_general(env, schedule, policy_ss, init_rng)
        return self

    def _fit_shared(self, env, schedule, policy_rng, init_rng):
        n_agents, n_states, n_actions = \
            env.n_agents, env.n_states, env.n_actions
        q = np.stack(self._initial_tables(
            [(n_states, n_actions)] * n_agents, init_rng))
        visits = np.zeros((n_states, n_actions), dtype=np.int64)
        oracle = value_iteration_averaged(env.model, self.gamma) \
            if self.compute_oracle_gap else None
        history = {"epoch": [], "mean_return": [], "consensus_error": [],
                   "max_oracle_gap": []}
        snapshots = []
        gamma, eps = self.gamma, self.epsilon
        state = env.reset()
        max_abs_q = 0.0
        for epoch in range(1, self.epochs + 1):
            reward_accum = 0.0
            for _ in range(self.inner_steps):
                row = q[:, state, :].mean(axis=0)
                action = epsilon_greedy(row, eps, policy_rng)
                next_state, rewards, _done = env.step(action)
                alpha = alpha_at(int(visits[state, action]), schedule)
                td = rewards + gamma * q[:, next_state, :].max(axis=1) \
                    - q[:, state, action]
                q[:, state, action] = q[:, state, action] + alpha * td
                visits[state, action] += 1
                reward_accum += float(rewards.mean())
                state = next_state
            self._check_finite([q], epoch)
            max_abs_q = max(max_abs_q, float(np.max(np.abs(q))))
            history["epoch"].append(epoch)
            history["mean_return"].append(reward_accum / self.inner_steps)
            history["consensus_error"].append(
                float(np.mean((q - q.mean(axis=0)) ** 2)))
            history["max_oracle_gap"].append(
                float(np.max(np.abs(q - oracle.values)))
                if oracle is not None else float("nan"))
            if self.snapshot_interval and \
                    epoch % self.snapshot_interval == 0:
                snapshots.append((epoch, q.copy()))
        self._finish(env, q=[q[i] for i in range(n_agents)],
                     visits=[visits.copy() for _ in range(n_agents)],
                     history=history, snapshots=snapshots, oracle=oracle,
                     max_abs_q=max_abs_q)

    def _fit_general(self, env, schedule, policy_ss, init_rng):
        n_agents = env.n_agents
        shapes = [(env.n_local_states(i), env.n_actions)
                  for i in range(n_agents)]
        q_list = self._initial_tables(shapes, init_rng)
        visits_list = [np.zeros(shape, dtype=np.int64) for shape in shapes]
        agent_rngs = [np.random.default_rng(c)
                      for c in policy_ss.spawn(n_agents)]
        history = {"epoch": [], "mean_return": [], "consensus_error": [],
                   "max_oracle_gap": []}
        snapshots = []
        gamma, eps = self.gamma, self.epsilon
        global_state = env.reset()
        local_idx = [env.local_index(i, env.observe(i, global_state))
                     for i in range(n_agents)]
        max_abs_q = 0.0
        for epoch in range(1, self.epochs + 1):
            reward_accum = 0.0
            for _ in range(self.inner_steps):
                actions = [epsilon_greedy(q_list[i][local_idx[i]], eps,
                                          agent_rngs[i])
                           for i in range(n_agents)]
                global_state, rewards, done = env.step(actions)
                next_idx = [env.local_index(i, env.observe(i, global_state))
                            for i in range(n_agents)]
                for i in range(n_agents):
                    s_i, a_i = local_idx[i], actions[i]
                    alpha = alpha_at(int(visits_list[i][s_i, a_i]), schedule)
                    bootstrap = 0.0 if done else q_list[i][next_idx[i]].max()
                    td = rewards[i] + gamma * bootstrap - q_list[i][s_i, a_i]
                    q_list[i][s_i, a_i] = q_list[i][s_i, a_i] + alpha * td
                    visits_list[i][s_i, a_i] += 1
                reward_accum += float(np.mean(rewards))
                if done:
                    global_state = env.reset()
                    next_idx = [env.local_index(i,
                                                env.observe(i, global_state))
                                for i in range(n_agents)]
                local_idx = next_idx
            self._check_finite(q_list, epoch)
            max_abs_q = max(max_abs_q,
                            max(float(np.max(np.abs(q))) for q in q_list))
            history["epoch"].append(epoch)
            history["mean_return"].append(reward_accum / self.inner_steps)
            history["consensus_error"].append(float("nan"))
            history["max_oracle_gap"].append(float("nan"))
            if self.snapshot_interval and \
                    epoch % self.snapshot_interval == 0:
                snapshots.append((epoch, [q.copy() for q in q_list]))
        self._finish(env, q=q_list, visits=visits_list, history=history,
                     snapshots=snapshots, oracle=None, max_abs_q=max_abs_q)

    def _finish(self, env, q, visits, history, snapshots, oracle, max_abs_q):
        self.env_ = env
        self.q_tables_ = [QTable(values=values, visits=v)
                          for values, v in zip(q, visits)]
        self.q_values_ = np.stack(q) if env.is_shared_chain else None
        self.visits_ = visits[0] if env.is_shared_chain else visits
        self.history_ = {k: np.asarray(v) for k, v in history.items()}
        self.snapshots_ = snapshots
        self.oracle_ = oracle
        self.n_agents_ = env.n_agents
        self.max_abs_q_ = max_abs_q
        self.q_bound_ = env.max_abs_reward / (1.0 - self.gamma) + 1.0


# ---------------------------------------------------------------------------
# reciprocity trainer
# ---------------------------------------------------------------------------

class TabularPR(_TabularEstimatorBase):
    """Tabular trainer with cross-agent, cross-state value pooling.

    kappa : float in [0, 1]
        Mixing weight between same-state neighbor values (kappa) and
        neighbor values aggregated over adjacent states (1 - kappa).
    adjacency : AdjacencyConfig or None
        How cross-state aggregation spaces are built; defaults to the
        digital +/-1 index convention.
    graph_mode, graph_p :
        Neighbor graph over agents: "complete", or "erdos_renyi" with
        per-epoch edge probability ``graph_p``.
    """

    def __init__(self, kappa: float = 1.0, gamma: float = 0.8,
                 epsilon: float = 1.0, epochs: int = 2000,
                 inner_steps: int = 25,
                 schedule: ScheduleConfig | None = None,
                 adjacency: AdjacencyConfig | None = None,
                 graph_mode: str = COMPLETE, graph_p: float | None = None,
                 q_init: float = 0.0, temperature: float = 1.0,
                 snapshot_interval: int = 0, compute_oracle_gap: bool = True,
                 random_state: int | None = 0):
        self.kappa = kappa
        self.gamma = gamma
        self.epsilon = epsilon
        self.epochs = epochs
        self.inner_steps = inner_steps
        self.schedule = schedule
        self.adjacency = adjacency
        self.graph_mode = graph_mode
        self.graph_p = graph_p
        self.q_init = q_init
        self.temperature = temperature
        self.snapshot_interval = snapshot_interval
        self.compute_oracle_gap = compute_oracle_gap
        self.random_state = random_state

    # -- config resolution ---------------------------------------------------
    def _resolved_adjacency(self) -> AdjacencyConfig:
        adjacency = self.adjacency if self.adjacency is not None \
            else AdjacencyConfig(level=1, mode="custom_digital")
        if not isinstance(adjacency, AdjacencyConfig):
            raise ConfigError("adjacency: expected an AdjacencyConfig")
        return adjacency.validate()

    def _resolved_graph(self, n_agents: int) -> ConnectivityGraph:
        return ConnectivityGraph(mode=self.graph_mode, n=n_agents,
                                 p=self.graph_p).validate()

    def _validate(self):
        super()._validate()
        check_scalar(self.kappa, "kappa", low=0.0, high=1.0)
        self._resolved_adjacency()
        # the agent count binds at fit time; 2 just exercises mode/p checks
        self._resolved_graph(2)

    def fit(self, env, y=None):
        self._validate()
        schedule = self._resolved_schedule()
        adjacency = self._resolved_adjacency()
        graph = self._resolved_graph(env.n_agents)
        policy_ss, graph_rng, init_rng = self._spawn_streams(env)
        if env.is_shared_chain:
            self._fit_shared(env, schedule, adjacency, graph,
                             np.random.default_rng(policy_ss), graph_rng,
                             init_rng)
        else:
            self._fit_general(env, schedule, adjacency, graph,
                              policy_ss, graph_rng, init_rng)
        return self

    # -- pooled-target precomputation ----------------------------------------
    def _epoch_neighbors(self, graph, graph_rng, n_agents):
        if n_agents == 1:
            # a lone agent pools with itself; the pull is then inert for
            # kappa = 1 and purely cross-state otherwise
            return [np.array([0])]
        if graph.mode == COMPLETE:
            return [np.delete(np.arange(n_agents), i)
                    for i in range(n_agents)]
        return graph.neighbors(graph_rng)

    def _pooled_tensor_shared(self, snap, neighbors, mixing, available,
                              kappa):
        """Pooled target [N, S, A] from an epoch-boundary snapshot."""
        n_agents = snap.shape[0]
        sharp = np.einsum("st,nta->nsa", mixing, snap) \
            if kappa < 1.0 else None
        pooled = np.zeros_like(snap)
        usable = np.ones((n_agents, snap.shape[1]), dtype=bool)
        missing = ~available
        for i in range(n_agents):
            neigh = neighbors[i]
            if len(neigh) == 0:
                usable[i] = False  # isolated this epoch: no pull
                continue
            same_mean = snap[neigh].mean(axis=0)
            if kappa == 1.0:
                pooled[i] = same_mean
                continue
            sharp_mean = sharp[neigh].mean(axis=0)
            pooled[i] = kappa * same_mean + (1.0 - kappa) * sharp_mean
            if np.any(missing):
                if kappa > 0.0:
                    # states with an empty adjacency space: the cross-state
                    # mass has nowhere to go; renormalize onto the
                    # same-state term to keep the target convex
                    pooled[i][missing] = same_mean[missing]
                else:
                    usable[i, missing] = False
        return pooled, usable

    # -- shared-chain path -----------------------------------------------------
    def _fit_shared(self, env, schedule, adjacency, graph,
                    policy_rng, graph_rng, init_rng):
        n_agents, n_states, n_actions = \
            env.n_agents, env.n_states, env.n_actions
        q = np.stack(self._initial_tables(
            [(n_states, n_actions)] * n_agents, init_rng))
        visits = np.zeros((n_states, n_actions), dtype=np.int64)
        local_states = env.local_state_space(0)
        mixing, available = state_mixing_matrix(local_states, local_states,
                                                adjacency)
        oracle = value_iteration_averaged(env.model, self.gamma) \
            if self.compute_oracle_gap else None
        beta_possible = (schedule.mode == "polynomial" and schedule.b > 0.0) \
            or (schedule.mode == "constant" and schedule.beta_const > 0.0)
        # a lone agent pooling same-state values with itself pulls toward
        # its own current entry, which is a no-op: drop the term entirely
        # so the run is exactly an independent-learner trajectory
        beta_possible = beta_possible and not (n_agents == 1
                                               and self.kappa == 1.0)
        history = {"epoch": [], "mean_return": [], "consensus_error": [],
                   "max_oracle_gap": []}
        snapshots = []
        clip_events = 0
        gamma, eps, kappa = self.gamma, self.epsilon, self.kappa
        state = env.reset()
        max_abs_q = 0.0
        for epoch in range(1, self.epochs + 1):
            if beta_possible:
                pooled, usable = self._pooled_tensor_shared(
                    q.copy(), self._epoch_neighbors(graph, graph_rng,
                                                    n_agents),
                    mixing, available, kappa)
            reward_accum = 0.0
            for _ in range(self.inner_steps):
                row = q[:, state, :].mean(axis=0)
                action = epsilon_greedy(row, eps, policy_rng)
                next_state, rewards, _done = env.step(action)
                k = int(visits[state, action])
                alpha = alpha_at(k, schedule)
                td = rewards + gamma * q[:, next_state, :].max(axis=1) \
                    - q[:, state, action]
                old = q[:, state, action]
                new = old + alpha * td
                if beta_possible:
                    beta = beta_at(k, schedule)
                    if alpha + beta > 1.0:
                        beta = 1.0 - alpha
                        clip_events += 1
                    if beta != 0.0:
                        pull = np.where(usable[:, state],
                                        pooled[:, state, action] - old, 0.0)
                        new = new + beta * pull
                q[:, state, action] = new
                visits[state, action] += 1
                reward_accum += float(rewards.mean())
                state = next_state
            self._check_finite([q], epoch)
            max_abs_q = max(max_abs_q, float(np.max(np.abs(q))))
            history["epoch"].append(epoch)
            history["mean_return"].append(reward_accum / self.inner_steps)
            history["consensus_error"].append(
                float(np.mean((q - q.mean(axis=0)) ** 2)))
            history["max_oracle_gap"].append(
                float(np.max(np.abs(q - oracle.values)))
                if oracle is not None else float("nan"))
            if self.snapshot_interval and \
                    epoch % self.snapshot_interval == 0:
                snapshots.append((epoch, q.copy()))
        if clip_events:
            logger.warning(
                "alpha + beta exceeded 1 on %d updates; beta was clipped "
                "to 1 - alpha", clip_events)
        self._finish(env, q=[q[i] for i in range(n_agents)],
                     visits=[visits.copy() for _ in range(n_agents)],
                     history=history, snapshots=snapshots, oracle=oracle,
                     max_abs_q=max_abs_q, clip_events=clip_events)

    # -- heterogeneous path ----------------------------------------------------
    def _fit_general(self, env, schedule, adjacency, graph,
                     policy_ss, graph_rng, init_rng):
        n_agents = env.n_agents
        shapes = [(env.n_local_states(i), env.n_actions)
                  for i in range(n_agents)]
        q_list = self._initial_tables(shapes, init_rng)
        visits_list = [np.zeros(shape, dtype=np.int64) for shape in shapes]
        agent_rngs = [np.random.default_rng(c)
                      for c in policy_ss.spawn(n_agents)]
        spaces = [env.local_state_space(i) for i in range(n_agents)]
        same_obs = [[spaces[i][0].obs == spaces[j][0].obs
                     for j in range(n_agents)] for i in range(n_agents)]
        mixing = {}
        for i in range(n_agents):
            for j in range(n_agents):
                if i == j and n_agents > 1:
                    continue
                mixing[(i, j)] = state_mixing_matrix(spaces[i], spaces[j],
                                                     adjacency)
        beta_possible = (schedule.mode == "polynomial" and schedule.b > 0.0) \
            or (schedule.mode == "constant" and schedule.beta_const > 0.0)
        # see _fit_shared: a lone agent's same-state self-pull is a no-op
        beta_possible = beta_possible and not (n_agents == 1
                                               and self.kappa == 1.0)
        history = {"epoch": [], "mean_return": [], "consensus_error": [],
                   "max_oracle_gap": []}
        snapshots = []
        clip_events = 0
        gamma, eps, kappa = self.gamma, self.epsilon, self.kappa
        global_state = env.reset()
        local_idx = [env.local_index(i, env.observe(i, global_state))
                     for i in range(n_agents)]
        max_abs_q = 0.0
        for epoch in range(1, self.epochs + 1):
            if beta_possible:
                pooled, usable = self._pooled_general(
                    [np.array(t, copy=True) for t in q_list],
                    self._epoch_neighbors(graph, graph_rng, n_agents),
                    mixing, same_obs, kappa, shapes)
            reward_accum = 0.0
            for _ in range(self.inner_steps):
                actions = [epsilon_greedy(q_list[i][local_idx[i]], eps,
                                          agent_rngs[i])
                           for i in range(n_agents)]
                global_state, rewards, done = env.step(actions)
                next_idx = [env.local_index(i, env.observe(i, global_state))
                            for i in range(n_agents)]
                for i in range(n_agents):
                    s_i, a_i = local_idx[i], actions[i]
                    k = int(visits_list[i][s_i, a_i])
                    alpha = alpha_at(k, schedule)
                    bootstrap = 0.0 if done else q_list[i][next_idx[i]].max()
                    td = rewards[i] + gamma * bootstrap - q_list[i][s_i, a_i]
                    old = q_list[i][s_i, a_i]
                    new = old + alpha * td
                    if beta_possible:
                        beta = beta_at(k, schedule)
                        if alpha + beta > 1.0:
                            beta = 1.0 - alpha
                            clip_events += 1
                        if beta != 0.0 and usable[i][s_i]:
                            new = new + beta * (pooled[i][s_i, a_i] - old)
                    q_list[i][s_i, a_i] = new
                    visits_list[i][s_i, a_i] += 1
                reward_accum += float(np.mean(rewards))
                if done:
                    global_state = env.reset()
                    next_idx = [env.local_index(i,
                                                env.observe(i, global_state))
                                for i in range(n_agents)]
                local_idx = next_idx
            self._check_finite(q_list, epoch)
            max_abs_q = max(max_abs_q,
                            max(float(np.max(np.abs(t))) for t in q_list))
            history["epoch"].append(epoch)
            history["mean_return"].append(reward_accum / self.inner_steps)
            history["consensus_error"].append(float("nan"))
            history["max_oracle_gap"].append(float("nan"))
            if self.snapshot_interval and \
                    epoch % self.snapshot_interval == 0:
                snapshots.append((epoch, [t.copy() for t in q_list]))
        if clip_events:
            logger.warning(
                "alpha + beta exceeded 1 on %d updates; beta was clipped "
                "to 1 - alpha", clip_events)
        self._finish(env, q=q_list, visits=visits_list, history=history,
                     snapshots=snapshots, oracle=None, max_abs_q=max_abs_q,
                     clip_events=clip_events)

    def _pooled_general(self, snaps, neighbors, mixing, same_obs, kappa,
                        shapes):
        """Per-agent pooled targets over heterogeneous local spaces.

        Each side of the mixture renormalizes over the peers (and, for
        the cross-state side, the anchor states) that actually provide a
        value; rows with no information at all are flagged unusable.
        """
        n_agents = len(snaps)
        pooled, usable = [], []
        for i in range(n_agents):
            shape = shapes[i]
            neigh = list(neighbors[i])
            if not neigh:
                pooled.append(np.zeros(shape))
                usable.append(np.zeros(shape[0], dtype=bool))
                continue
            same_sum = np.zeros(shape)
            same_cnt = 0
            sharp_sum = np.zeros(shape)
            sharp_cnt = np.zeros(shape[0])
            for j in neigh:
                if same_obs[i][j]:
                    same_sum += snaps[j]
                    same_cnt += 1
                w, avail = mixing[(i, j)]
                if np.any(avail):
                    sharp_sum[avail] += (w @ snaps[j])[avail]
                    sharp_cnt[avail] += 1.0
            kappa_mass = kappa if same_cnt else 0.0
            sharp_mass = np.where(sharp_cnt > 0, 1.0 - kappa, 0.0)
            total = kappa_mass + sharp_mass
            ok = total > 0.0
            target = np.zeros(shape)
            if same_cnt:
                target += kappa_mass * same_sum / same_cnt
            safe_cnt = np.where(sharp_cnt > 0, sharp_cnt, 1.0)
            target += (sharp_mass / safe_cnt)[:, None] * sharp_sum
            with np.errstate(invalid="ignore", divide="ignore"):
                target = np.where(ok[:, None], target / total[:, None], 0.0)
            pooled.append(target)
            usable.append(ok)
        return pooled, usable

    def _finish(self, env, q, visits, history, snapshots, oracle,
                max_abs_q, clip_events):
        self.env_ = env
        self.q_tables_ = [QTable(values=values, visits=v)
                          for values, v in zip(q, visits)]
        self.q_values_ = np.stack(q) if env.is_shared_chain else None
        self.visits_ = visits[0] if env.is_shared_chain else visits
        self.history_ = {k: np.asarray(v) for k, v in history.items()}
        self.snapshots_ = snapshots
        self.oracle_ = oracle
        self.n_agents_ = env.n_agents
        self.max_abs_q_ = max_abs_q
        self.q_bound_ = env.max_abs_reward / (1.0 - self.gamma) + 1.0
        self.clip_events_ = clip_events
