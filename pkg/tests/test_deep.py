import numpy as np
import pytest

from policy_reciprocity.deep import (DeepPR, actor_objective_grads,
                                     adjacency_indices, critic_loss_grads,
                                     deep_aggregate)
from policy_reciprocity.errors import (ConfigError, DivergenceError,
                                       NotFittedError)
from policy_reciprocity.nets import MLP
from policy_reciprocity.pointmass import PointMassEnv


# ---------------------------------------------------------------------------
# adjacency over continuous states
# ---------------------------------------------------------------------------

def test_adjacency_indices_euclidean_ball():
    pool = np.array([[0.0, 0.0], [0.1, 0.0], [1.0, 1.0]])
    sets = adjacency_indices(np.array([[0.0, 0.0]]), pool, epsilon=0.5)
    np.testing.assert_array_equal(sets[0], [0, 1])
    sets = adjacency_indices(np.array([[0.0, 0.0]]), pool, epsilon=2.0)
    np.testing.assert_array_equal(sets[0], [0, 1, 2])


def test_adjacency_indices_mask_restricts_distance():
    pool = np.array([[0.0, 5.0], [0.3, 0.0]])
    q = np.array([[0.0, 0.0]])
    # full distance: row 0 is far; masking out coordinate 1 brings it in
    assert 0 not in adjacency_indices(q, pool, 0.4)[0]
    masked = adjacency_indices(q, pool, 0.4, mask=[True, False])[0]
    np.testing.assert_array_equal(masked, [0, 1])


def test_adjacency_indices_empty_pool():
    sets = adjacency_indices(np.zeros((3, 2)), np.empty((0, 2)), 1.0)
    assert all(len(s) == 0 for s in sets)


# ---------------------------------------------------------------------------
# pooled critic target
# ---------------------------------------------------------------------------

def _nets(n_agents, state_dim, act_total, seed=0):
    rng = np.random.default_rng(seed)
    return [MLP((state_dim + act_total, 8, 1), rng) for _ in range(n_agents)]


def test_deep_aggregate_brute_force():
    """Hand-rolled double loop over peers and adjacency sets must match,
    including the mixing weight sitting on the peer side."""
    rng = np.random.default_rng(1)
    n_agents, sd, ad = 3, 4, 2
    critics = _nets(n_agents, sd, n_agents * ad)
    batch = 5
    s2 = rng.normal(size=(batch, sd))
    a2 = rng.normal(size=(batch, n_agents * ad))
    pool = np.concatenate([s2 + 0.01 * rng.normal(size=s2.shape),
                           rng.normal(size=(10, sd))])
    kappa, eps = 0.4, 0.3

    got = deep_aggregate(0, critics, s2, a2, pool, kappa, eps)

    sets = adjacency_indices(s2, pool, eps)
    for b in range(batch):
        own = critics[0](np.concatenate([s2[b], a2[b]])[None, :])[0, 0]
        peer_vals = []
        for j in (1, 2):
            members = [s2[b]] + [pool[ix] for ix in sets[b]]
            vals = [critics[j](np.concatenate([m, a2[b]])[None, :])[0, 0]
                    for m in members]
            peer_vals.append(np.mean(vals))
        want = (1 - kappa) * own + kappa * np.mean(peer_vals)
        assert got[b] == pytest.approx(want, rel=1e-12)


def test_deep_aggregate_epsilon_zero_uses_next_state_only():
    rng = np.random.default_rng(2)
    critics = _nets(2, 3, 2)
    s2 = rng.normal(size=(4, 3))
    a2 = rng.normal(size=(4, 2))
    pool = rng.normal(size=(50, 3))
    got = deep_aggregate(0, critics, s2, a2, pool, kappa=1.0, epsilon=0.0)
    want = critics[1](np.concatenate([s2, a2], axis=1))[:, 0]
    np.testing.assert_allclose(got, want, rtol=1e-15)


def test_deep_aggregate_no_peers_keeps_own_value():
    rng = np.random.default_rng(3)
    critics = _nets(1, 3, 2)
    s2 = rng.normal(size=(2, 3))
    a2 = rng.normal(size=(2, 2))
    got = deep_aggregate(0, critics, s2, a2, np.empty((0, 3)), 0.9, 0.5)
    want = critics[0](np.concatenate([s2, a2], axis=1))[:, 0]
    np.testing.assert_array_equal(got, want)


def test_deep_aggregate_kappa_zero_is_own_value():
    rng = np.random.default_rng(4)
    critics = _nets(3, 3, 3)
    s2 = rng.normal(size=(2, 3))
    a2 = rng.normal(size=(2, 3))
    got = deep_aggregate(1, critics, s2, a2, rng.normal(size=(5, 3)),
                         kappa=0.0, epsilon=1.0)
    want = critics[1](np.concatenate([s2, a2], axis=1))[:, 0]
    np.testing.assert_array_equal(got, want)


# ---------------------------------------------------------------------------
# objective gradients (finite-difference checked here at small scale;
# the acceptance suite repeats this over many random configurations)
# ---------------------------------------------------------------------------

def _fd_grad(net, scalar_fn, eps=1e-6):
    flat = net.get_flat()
    grad = np.zeros_like(flat)
    for k in range(flat.size):
        bumped = flat.copy()
        bumped[k] += eps
        net.set_flat(bumped)
        hi = scalar_fn()
        bumped[k] -= 2 * eps
        net.set_flat(bumped)
        lo = scalar_fn()
        grad[k] = (hi - lo) / (2 * eps)
    net.set_flat(flat)
    return grad


def test_critic_loss_grads_match_fd():
    rng = np.random.default_rng(5)
    critic = MLP((6, 8, 1), rng)
    inputs = rng.normal(size=(7, 6))
    targets = rng.normal(size=7)
    loss, grads, preds = critic_loss_grads(critic, inputs, targets)
    assert preds.shape == (7,)
    assert loss == pytest.approx(float(np.mean((preds - targets) ** 2)))
    numeric = _fd_grad(critic,
                       lambda: critic_loss_grads(critic, inputs, targets)[0])
    rel = np.abs(grads - numeric).max() / max(np.abs(numeric).max(), 1e-12)
    assert rel < 1e-6


def test_actor_objective_grads_match_fd():
    rng = np.random.default_rng(6)
    sd, ad, n_agents = 4, 2, 2
    actor = MLP((sd, 8, ad), rng)
    critic = MLP((sd + n_agents * ad, 8, 1), rng)
    states = rng.normal(size=(6, sd))
    joint = rng.uniform(-1, 1, size=(6, n_agents * ad))
    block = slice(ad, 2 * ad)  # second agent's slice of the joint action
    obj, grads = actor_objective_grads(actor, critic, states, joint, block)
    numeric = _fd_grad(
        actor, lambda: actor_objective_grads(actor, critic, states, joint,
                                             block)[0])
    rel = np.abs(grads - numeric).max() / max(np.abs(numeric).max(), 1e-12)
    assert rel < 1e-6
    # the untouched blocks of the joint action must be left as given
    np.testing.assert_array_equal(joint[:, :ad],
                                  joint[:, :ad].copy())


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------

def _small_fit(**kw):
    params = dict(epochs=4, inner_steps=20, batch_size=16, hidden=(8,),
                  random_state=0)
    params.update(kw)
    env = PointMassEnv(n_agents=2, seed=3)
    return DeepPR(**params).fit(env)


def test_fit_populates_attributes():
    est = _small_fit()
    assert len(est.actors_) == 2 and len(est.critics_) == 2
    assert est.history_["epoch"].shape == (4,)
    assert np.isfinite(est.history_["mean_return"]).all()
    assert est.q_bound_ > 0
    acts = est.predict(np.zeros((3, 4)))
    assert acts.shape == (3, 2, 2)
    assert np.all(np.abs(acts) <= 1.0)


def test_same_seed_bitwise_reproducible():
    a = _small_fit(kappa=0.5, adjacency_epsilon=0.2)
    b = _small_fit(kappa=0.5, adjacency_epsilon=0.2)
    for na, nb in zip(a.actors_ + a.critics_, b.actors_ + b.critics_):
        np.testing.assert_array_equal(na.get_flat(), nb.get_flat())
    np.testing.assert_array_equal(a.history_["td_loss"],
                                  b.history_["td_loss"])


def test_different_kappa_changes_training():
    a = _small_fit(kappa=0.0)
    b = _small_fit(kappa=1.0)
    assert not np.array_equal(a.history_["td_loss"], b.history_["td_loss"])


def test_adjacency_epsilon_changes_training():
    a = _small_fit(kappa=0.8, adjacency_epsilon=0.0)
    b = _small_fit(kappa=0.8, adjacency_epsilon=0.8)
    assert not np.array_equal(a.history_["td_loss"], b.history_["td_loss"])


def test_divergence_threshold_trips():
    with pytest.raises(DivergenceError) as err:
        _small_fit(critic_lr=50.0, divergence_threshold=10.0, epochs=30)
    assert err.value.epoch >= 1


def test_parameter_validation():
    env = PointMassEnv(n_agents=2, seed=0)
    with pytest.raises(ConfigError):
        DeepPR(kappa=-0.1).fit(env)
    with pytest.raises(ConfigError):
        DeepPR(gamma=1.0).fit(env)
    with pytest.raises(ConfigError):
        DeepPR(hidden=(0,)).fit(env)
    with pytest.raises(NotFittedError):
        DeepPR().predict(np.zeros((1, 4)))
