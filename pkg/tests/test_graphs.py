import numpy as np
import pytest

from policy_reciprocity.errors import ConfigError
from policy_reciprocity.graphs import (ConnectivityGraph, expected_laplacian,
                                       laplacian)


def test_complete_graph_neighbors():
    g = ConnectivityGraph(mode="complete", n=4).validate()
    rng = np.random.default_rng(0)
    nbrs = g.neighbors(rng)
    assert len(nbrs) == 4
    for i, arr in enumerate(nbrs):
        assert sorted(arr) == [j for j in range(4) if j != i]


def test_er_adjacency_is_symmetric_no_self_loops():
    g = ConnectivityGraph(mode="erdos_renyi", n=12, p=0.4).validate()
    rng = np.random.default_rng(3)
    A = g.sample_adjacency(rng)
    assert A.shape == (12, 12)
    np.testing.assert_array_equal(A, A.T)
    assert np.all(np.diag(A) == 0)
    assert set(np.unique(A)).issubset({0, 1})


def test_er_sampling_deterministic_given_rng_state():
    g = ConnectivityGraph(mode="erdos_renyi", n=8, p=0.5).validate()
    a = g.sample_adjacency(np.random.default_rng(7))
    b = g.sample_adjacency(np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_er_edge_frequency_matches_p():
    g = ConnectivityGraph(mode="erdos_renyi", n=10, p=0.3).validate()
    rng = np.random.default_rng(1)
    total, edges = 0, 0
    for _ in range(300):
        A = g.sample_adjacency(rng)
        iu = np.triu_indices(10, k=1)
        edges += A[iu].sum()
        total += len(iu[0])
    assert edges / total == pytest.approx(0.3, abs=0.02)


def test_laplacian_rows_sum_to_zero_and_psd():
    g = ConnectivityGraph(mode="erdos_renyi", n=9, p=0.6).validate()
    A = g.sample_adjacency(np.random.default_rng(2))
    L = laplacian(A)
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    eig = np.linalg.eigvalsh(L)
    assert eig.min() >= -1e-10


def test_expected_laplacian_connectivity_in_expectation():
    """For the ER family the expected Laplacian is p*(n I - J), whose
    second-smallest eigenvalue is p*n > 0 for any p > 0 — the sense in
    which disconnected samples are admissible."""
    g = ConnectivityGraph(mode="erdos_renyi", n=6, p=0.25).validate()
    L = expected_laplacian(g)
    eig = np.sort(np.linalg.eigvalsh(L))
    assert eig[0] == pytest.approx(0.0, abs=1e-12)
    assert eig[1] == pytest.approx(0.25 * 6, rel=1e-12)


def test_validation_errors():
    with pytest.raises(ConfigError):
        ConnectivityGraph(mode="ring", n=4).validate()
    with pytest.raises(ConfigError):
        ConnectivityGraph(mode="erdos_renyi", n=4, p=0.0).validate()
    with pytest.raises(ConfigError):
        ConnectivityGraph(mode="erdos_renyi", n=4, p=1.5).validate()
    with pytest.raises(ConfigError):
        ConnectivityGraph(mode="complete", n=0).validate()
    # complete graphs need no p; supplying one anyway is an error
    with pytest.raises(ConfigError):
        ConnectivityGraph(mode="complete", n=4, p=0.5).validate()
