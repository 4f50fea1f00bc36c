"""Actor-critic extension of the reciprocity idea to continuous control.

Each agent holds a deterministic policy (tanh-squashed MLP) and a
centralized critic over (global state, joint action), plus target copies
of both.  The critic regresses onto

    y_i = r_i + gamma * Qstar_i(s', a')

where a' comes from the target actors and the pooled target mixes the
agent's own target critic with peer target critics averaged over states
adjacent to s':

    Qstar_i(s', a') = (1 - kappa) * Q_i(s', a')
                      + kappa * mean_j mean_{s# in Adj(s')} Q_j(s#, a')

The adjacency set of s' holds the replay-buffer next-states within
``adjacency_epsilon`` of s' (masked Euclidean distance) plus s' itself;
with epsilon = 0 it degenerates to {s'} and the peer terms are evaluated
at s' directly.  Pooled targets always read epoch-start snapshots of the
target critics, mirroring the tabular epoch barrier.

Everything is plain SGD on hand-rolled float64 networks, which keeps the
analytic gradients finite-difference checkable.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (ConfigError, ContractViolationError, DivergenceError,
                     NotFittedError)
from .nets import MLP, soft_update
from .replay import ReplayBuffer
from .validation import check_scalar

__all__ = ["DeepPR", "deep_aggregate", "adjacency_indices",
           "critic_loss_grads", "actor_objective_grads"]


# ---------------------------------------------------------------------------
# pooled target over continuous states
# ---------------------------------------------------------------------------

def adjacency_indices(queries: np.ndarray, pool: np.ndarray, epsilon: float,
                      mask=None):
    """Per query row, the pool rows within ``epsilon`` (masked Euclidean).

    Returns a list of index arrays into ``pool``.  ``mask`` optionally
    restricts the distance to a subset of state coordinates.
    """
    check_scalar(epsilon, "adjacency_epsilon", low=0.0)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if pool is None or pool.size == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(len(queries))]
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    if pool.shape[1] != queries.shape[1]:
        raise ContractViolationError(
            f"pool rows have {pool.shape[1]} coordinates, queries have "
            f"{queries.shape[1]}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        queries = queries[:, mask]
        pool = pool[:, mask]
    d2 = ((queries[:, None, :] - pool[None, :, :]) ** 2).sum(axis=-1)
    limit = epsilon ** 2
    return [np.flatnonzero(row <= limit) for row in d2]


def _peer_values(critic: MLP, states_next: np.ndarray,
                 actions_next: np.ndarray, pool: np.ndarray, sets) -> np.ndarray:
    """mean_{s# in {s'} ∪ set} Q(s#, a') for each batch row, one critic."""
    n_rows = states_next.shape[0]
    counts = np.array([1 + len(sets[b]) for b in range(n_rows)])
    if counts.max() == 1:  # every adjacency set degenerates to {s'}
        return critic(np.concatenate([states_next, actions_next],
                                     axis=1))[:, 0]
    stacked_states = np.concatenate(
        [np.concatenate([states_next[b:b + 1], pool[sets[b]]], axis=0)
         for b in range(n_rows)])
    stacked_actions = np.repeat(actions_next, counts, axis=0)
    values = critic(np.concatenate([stacked_states, stacked_actions],
                                   axis=1))[:, 0]
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return np.add.reduceat(values, offsets) / counts


def deep_aggregate(agent: int, critics, states_next: np.ndarray,
                   actions_next: np.ndarray, pool: np.ndarray, kappa: float,
                   epsilon: float, mask=None) -> np.ndarray:
    """Pooled critic target for a batch of (s', a') rows.

    ``critics`` are the epoch-start snapshots of all target critics.  An
    agent with no peers keeps its own value regardless of ``kappa``.
    """
    check_scalar(kappa, "kappa", low=0.0, high=1.0)
    states_next = np.atleast_2d(np.asarray(states_next, dtype=np.float64))
    actions_next = np.atleast_2d(np.asarray(actions_next, dtype=np.float64))
    own = critics[agent](np.concatenate([states_next, actions_next],
                                        axis=1))[:, 0]
    peers = [j for j in range(len(critics)) if j != agent]
    if not peers or kappa == 0.0:
        return own
    if epsilon > 0.0:
        sets = adjacency_indices(states_next, pool, epsilon, mask=mask)
    else:
        sets = [np.empty(0, dtype=np.int64)] * states_next.shape[0]
    peer_mean = np.zeros(states_next.shape[0])
    for j in peers:
        peer_mean += _peer_values(critics[j], states_next, actions_next,
                                  pool, sets)
    peer_mean /= len(peers)
    return (1.0 - kappa) * own + kappa * peer_mean


# ---------------------------------------------------------------------------
# differentiable objectives (finite-difference checkable)
# ---------------------------------------------------------------------------

def critic_loss_grads(critic: MLP, inputs: np.ndarray, targets: np.ndarray):
    """Mean-squared TD loss and its gradient wrt the critic parameters.

    Returns (loss, flat_gradient, predictions).
    """
    preds, cache = critic.forward(inputs)
    err = preds[:, 0] - np.asarray(targets, dtype=np.float64)
    loss = float(np.mean(err ** 2))
    grad_out = (2.0 * err / err.shape[0])[:, None]
    w_grads, b_grads, _ = critic.backward(cache, grad_out)
    return loss, MLP.flatten_grads(w_grads, b_grads), preds[:, 0]


def actor_objective_grads(actor: MLP, critic: MLP, states: np.ndarray,
                          joint_actions: np.ndarray, block: slice):
    """Deterministic policy-gradient objective for one agent.

    J = mean_b Q(s_b, a_b) with the agent's block of the joint action
    replaced by tanh(actor(s_b)); the rest of the joint action comes from
    the batch.  Returns (J, flat_gradient wrt actor parameters) where the
    gradient is of J (ascent direction).
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    raw, actor_cache = actor.forward(states)
    squashed = np.tanh(raw)
    joint = np.array(joint_actions, dtype=np.float64, copy=True)
    joint[:, block] = squashed
    inputs = np.concatenate([states, joint], axis=1)
    q, critic_cache = critic.forward(inputs)
    objective = float(np.mean(q[:, 0]))
    grad_out = np.full((states.shape[0], 1), 1.0 / states.shape[0])
    _, _, grad_inputs = critic.backward(critic_cache, grad_out)
    grad_action = grad_inputs[:, states.shape[1]:][:, block]
    grad_raw = grad_action * (1.0 - squashed ** 2)
    w_grads, b_grads, _ = actor.backward(actor_cache, grad_raw)
    return objective, MLP.flatten_grads(w_grads, b_grads)


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------

class DeepPR(BaseEstimator):
    """Multi-agent deterministic actor-critic with pooled critic targets."""

    def __init__(self, kappa: float = 0.5, gamma: float = 0.9,
                 actor_lr: float = 0.01, critic_lr: float = 0.05,
                 soft_update_rate: float = 0.05,
                 exploration_noise: float = 0.1,
                 adjacency_epsilon: float = 0.0, batch_size: int = 32,
                 buffer_capacity: int = 5000, epochs: int = 200,
                 inner_steps: int = 50, hidden=(32, 32),
                 divergence_threshold: float = 1e6,
                 random_state: int | None = 0):
        self.kappa = kappa
        self.gamma = gamma
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.soft_update_rate = soft_update_rate
        self.exploration_noise = exploration_noise
        self.adjacency_epsilon = adjacency_epsilon
        self.batch_size = batch_size
        self.buffer_capacity = buffer_capacity
        self.epochs = epochs
        self.inner_steps = inner_steps
        self.hidden = hidden
        self.divergence_threshold = divergence_threshold
        self.random_state = random_state

    def _validate(self):
        check_scalar(self.kappa, "kappa", low=0.0, high=1.0)
        check_scalar(self.gamma, "gamma", low=0.0, high=1.0,
                     include_high=False)
        check_scalar(self.actor_lr, "actor_lr", low=0.0, include_low=False)
        check_scalar(self.critic_lr, "critic_lr", low=0.0, include_low=False)
        check_scalar(self.soft_update_rate, "soft_update_rate", low=0.0,
                     high=1.0)
        check_scalar(self.exploration_noise, "exploration_noise", low=0.0)
        check_scalar(self.adjacency_epsilon, "adjacency_epsilon", low=0.0)
        check_scalar(self.batch_size, "batch_size", low=1, integral=True)
        check_scalar(self.buffer_capacity, "buffer_capacity", low=1,
                     integral=True)
        check_scalar(self.epochs, "epochs", low=1, integral=True)
        check_scalar(self.inner_steps, "inner_steps", low=1, integral=True)
        check_scalar(self.divergence_threshold, "divergence_threshold",
                     low=0.0, include_low=False)
        if not all(isinstance(h, (int, np.integer)) and h > 0
                   for h in self.hidden):
            raise ConfigError(f"hidden: expected positive ints, "
                              f"got {self.hidden!r}")
        if self.random_state is not None:
            check_scalar(self.random_state, "random_state", low=0,
                         integral=True)

    def fit(self, env, y=None):
        self._validate()
        n_agents = env.n_agents
        obs_dim, act_dim = env.obs_dim, env.action_dim
        root = np.random.SeedSequence(
            0 if self.random_state is None else self.random_state)
        env_ss, init_ss, noise_ss, sampler_ss = root.spawn(4)
        env.seed(env_ss)
        init_rng = np.random.default_rng(init_ss)
        noise_rngs = [np.random.default_rng(c)
                      for c in noise_ss.spawn(n_agents)]
        sampler_rng = np.random.default_rng(sampler_ss)

        hidden = tuple(int(h) for h in self.hidden)
        actors = [MLP((obs_dim, *hidden, act_dim), init_rng)
                  for _ in range(n_agents)]
        critic_in = obs_dim + n_agents * act_dim
        critics = [MLP((critic_in, *hidden, 1), init_rng)
                   for _ in range(n_agents)]
        target_actors = [a.copy() for a in actors]
        target_critics = [c.copy() for c in critics]
        buffer = ReplayBuffer(self.buffer_capacity)
        blocks = [slice(i * act_dim, (i + 1) * act_dim)
                  for i in range(n_agents)]

        history = {"epoch": [], "mean_return": [], "td_loss": [],
                   "actor_grad_norm": []}
        max_abs_q = 0.0
        obs = env.reset()
        for epoch in range(1, self.epochs + 1):
            agg_critics = [c.copy() for c in target_critics]
            td_losses, grad_norms = [], []
            reward_accum = 0.0
            for _ in range(self.inner_steps):
                joint = np.empty(n_agents * act_dim)
                for i in range(n_agents):
                    mean_action = np.tanh(actors[i](obs[None, :])[0])
                    noisy = mean_action + self.exploration_noise \
                        * noise_rngs[i].standard_normal(act_dim)
                    joint[blocks[i]] = np.clip(noisy, -1.0, 1.0)
                obs_next, rewards, done = env.step(
                    joint.reshape(n_agents, act_dim))
                buffer.add(obs, joint, rewards, obs_next)
                reward_accum += float(np.mean(rewards))
                obs = env.reset() if done else obs_next
                if len(buffer) < self.batch_size:
                    continue
                pool = buffer.next_states()
                for i in range(n_agents):
                    batch = buffer.sample(self.batch_size, sampler_rng)
                    loss, preds = self._critic_step(
                        i, batch, critics, target_actors, agg_critics,
                        pool, blocks, act_dim)
                    grad_norms.append(self._actor_step(i, batch, actors,
                                                       critics, blocks))
                    soft_update(target_critics[i], critics[i],
                                self.soft_update_rate)
                    soft_update(target_actors[i], actors[i],
                                self.soft_update_rate)
                    td_losses.append(loss)
                    max_abs_q = max(max_abs_q, float(np.max(np.abs(preds))))
            epoch_loss = float(np.mean(td_losses)) if td_losses \
                else float("nan")
            if td_losses and (not np.isfinite(epoch_loss)
                              or epoch_loss > self.divergence_threshold):
                raise DivergenceError(
                    f"TD loss {epoch_loss:g} at epoch {epoch}", epoch=epoch)
            history["epoch"].append(epoch)
            history["mean_return"].append(reward_accum / self.inner_steps)
            history["td_loss"].append(epoch_loss)
            history["actor_grad_norm"].append(
                float(np.mean(grad_norms)) if grad_norms else float("nan"))
        self.env_ = env
        self.actors_ = actors
        self.critics_ = critics
        self.target_actors_ = target_actors
        self.target_critics_ = target_critics
        self.buffer_ = buffer
        self.history_ = {k: np.asarray(v) for k, v in history.items()}
        self.n_agents_ = n_agents
        self.max_abs_q_ = max_abs_q
        self.q_bound_ = env.max_abs_reward / (1.0 - self.gamma) + 1.0
        return self

    def _critic_step(self, agent, batch, critics, target_actors,
                     agg_critics, pool, blocks, act_dim):
        s2 = batch["next_states"]
        a2 = np.empty((s2.shape[0], len(blocks) * act_dim))
        for j, block in enumerate(blocks):
            a2[:, block] = np.tanh(target_actors[j](s2))
        pooled = deep_aggregate(agent, agg_critics, s2, a2, pool,
                                self.kappa, self.adjacency_epsilon)
        y = batch["rewards"][:, agent] + self.gamma * pooled
        inputs = np.concatenate([batch["states"], batch["actions"]], axis=1)
        loss, grads, preds = critic_loss_grads(critics[agent], inputs, y)
        critics[agent].set_flat(critics[agent].get_flat()
                                - self.critic_lr * grads)
        return loss, preds

    def _actor_step(self, agent, batch, actors, critics, blocks):
        _, grads = actor_objective_grads(
            actors[agent], critics[agent], batch["states"],
            batch["actions"], blocks[agent])
        actors[agent].set_flat(actors[agent].get_flat()
                               + self.actor_lr * grads)
        return float(np.linalg.norm(grads))

    # -- inference ------------------------------------------------------------
    def _check_fitted(self):
        if not hasattr(self, "actors_"):
            raise NotFittedError("DeepPR instance is not fitted yet")

    def predict(self, X):
        """Deterministic joint actions, [n_queries, n_agents, action_dim]."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.stack([np.tanh(actor(X)) for actor in self.actors_],
                        axis=1)
