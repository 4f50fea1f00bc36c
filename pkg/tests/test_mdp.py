import numpy as np
import pytest

from policy_reciprocity.errors import ConfigError, ContractViolationError
from policy_reciprocity.mdp import (LocalState, ObservationMatrix, QTable,
                                    generate_digital_model, lift, load_model,
                                    sample_next_state, sample_rewards,
                                    sample_transition, save_model, unlift)


@pytest.fixture
def model():
    return generate_digital_model(n_states=7, n_agents=3, seed=123)


def test_generated_model_shapes_and_stochasticity(model):
    assert model.probs.shape == (7, 2, 7)
    assert model.mean_reward.shape == (3, 7, 2)
    np.testing.assert_allclose(model.probs.sum(axis=-1), 1.0, atol=1e-12)
    assert model.probs.min() >= 0.0
    assert model.mean_reward.min() >= 0.0
    assert model.mean_reward.max() <= 4.0
    # worst-case magnitude: largest mean plus the noise half-width
    assert model.max_abs_reward \
        == pytest.approx(model.mean_reward.max() + 0.5)


def test_generation_is_seed_deterministic():
    a = generate_digital_model(5, 2, seed=9)
    b = generate_digital_model(5, 2, seed=9)
    np.testing.assert_array_equal(a.probs, b.probs)
    np.testing.assert_array_equal(a.mean_reward, b.mean_reward)
    c = generate_digital_model(5, 2, seed=10)
    assert not np.array_equal(a.probs, c.probs)


def test_sample_next_state_matches_transition_rows(model):
    rng = np.random.default_rng(0)
    counts = np.zeros(model.n_states)
    for _ in range(4000):
        counts[sample_next_state(model, 2, 1, rng)] += 1
    freq = counts / counts.sum()
    np.testing.assert_allclose(freq, model.probs[2, 1], atol=0.03)


def test_sample_rewards_bounded_around_mean(model):
    rngs = [np.random.default_rng(i) for i in range(model.n_agents)]
    for _ in range(200):
        r = sample_rewards(model, 3, 0, rngs)
        assert r.shape == (model.n_agents,)
        np.testing.assert_array_less(
            np.abs(r - model.mean_reward[:, 3, 0]), 0.5 + 1e-12)


def test_sample_transition_consistent(model):
    rng = np.random.default_rng(5)
    reward_rngs = [np.random.default_rng(100 + i)
                   for i in range(model.n_agents)]
    s2, r = sample_transition(model, 0, 1, rng, reward_rngs)
    assert 0 <= s2 < model.n_states
    assert r.shape == (model.n_agents,)


def test_model_save_load_round_trip(tmp_path, model):
    path = tmp_path / "model.json"
    save_model(model, path, seed=123)
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.probs, model.probs)
    np.testing.assert_array_equal(loaded.mean_reward, model.mean_reward)
    assert loaded.reward_half_width == model.reward_half_width


def test_load_rejects_inconsistent_header(tmp_path, model):
    import json
    path = tmp_path / "model.json"
    save_model(model, path)
    payload = json.loads(path.read_text())
    payload["n_states"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises((ConfigError, ContractViolationError)):
        load_model(path)


def test_qtable_validates_shape():
    QTable(values=np.zeros((3, 2)))
    with pytest.raises(ContractViolationError):
        QTable(values=np.zeros(3))


# -- partial observation plumbing ------------------------------------------

def test_observation_matrix_and_lift():
    obs = ObservationMatrix(rows=(0, 2), d=4)
    local = obs.observe((7, 8, 9, 10))
    assert local.values == (7, 9)
    assert lift(local) == (7, None, 9, None)
    assert unlift((7, None, 9, None), obs) == local


def test_observation_matrix_rejects_bad_rows():
    with pytest.raises(ContractViolationError):
        ObservationMatrix(rows=(2, 0), d=4)   # not increasing
    with pytest.raises(ContractViolationError):
        ObservationMatrix(rows=(0, 5), d=4)   # out of range
    with pytest.raises(ContractViolationError):
        ObservationMatrix(rows=(), d=4)       # empty view


def test_identity_observation():
    obs = ObservationMatrix.identity(3)
    assert obs.rows == (0, 1, 2)
    local = obs.observe((4, 5, 6))
    assert lift(local) == (4, 5, 6)


def test_local_state_length_must_match_rows():
    obs = ObservationMatrix(rows=(0, 1), d=3)
    with pytest.raises(ContractViolationError):
        LocalState(values=(1,), obs=obs)
