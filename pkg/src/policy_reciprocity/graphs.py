"""Inter-agent connectivity graphs.

Aggregation reads neighbor tables through a communication graph that is
either fixed and complete or redrawn every epoch (Erdos-Renyi).  Self
loops are never included: an agent's own table enters the update through
the local temporal-difference term, not through its neighborhood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .validation import check_choice, check_scalar

COMPLETE = "complete"
ERDOS_RENYI = "erdos_renyi"
GRAPH_MODES = (COMPLETE, ERDOS_RENYI)


@dataclass(frozen=True)
class ConnectivityGraph:
    """Distribution over per-epoch neighbor sets for ``n`` agents.

    For ``erdos_renyi`` each undirected edge is present independently
    with probability ``p``.  Requiring ``p > 0`` keeps the expected graph
    connected in the mean-Laplacian sense (its second-smallest eigenvalue
    is ``p * n`` > 0), which is what the aggregation analysis needs.
    """

    mode: str = COMPLETE
    n: int = 2
    p: float | None = None

    def validate(self) -> "ConnectivityGraph":
        check_choice(self.mode, "graph.mode", GRAPH_MODES)
        check_scalar(self.n, "graph.n", low=1, integral=True)
        if self.mode == ERDOS_RENYI:
            if self.p is None:
                raise ConfigError("graph.p: required for erdos_renyi mode")
            check_scalar(self.p, "graph.p", low=0.0, include_low=False,
                         high=1.0)
        elif self.p is not None:
            raise ConfigError(
                f"graph.p: only meaningful for erdos_renyi, not {self.mode}")
        return self

    def sample_adjacency(self, rng: np.random.Generator) -> np.ndarray:
        """Symmetric 0/1 adjacency matrix with a zero diagonal."""
        self.validate()
        if self.mode == COMPLETE:
            adj = np.ones((self.n, self.n), dtype=np.int64)
        else:
            upper = rng.random((self.n, self.n)) < self.p
            adj = np.triu(upper, k=1).astype(np.int64)
            adj = adj + adj.T
        np.fill_diagonal(adj, 0)
        return adj

    def neighbors(self, rng: np.random.Generator) -> list:
        """Neighbor index arrays, one per agent, for one sampled graph."""
        adj = self.sample_adjacency(rng)
        return [np.flatnonzero(adj[i]) for i in range(self.n)]


def laplacian(adjacency: np.ndarray) -> np.ndarray:
    adjacency = np.asarray(adjacency, dtype=np.float64)
    return np.diag(adjacency.sum(axis=1)) - adjacency


def expected_laplacian(graph: ConnectivityGraph) -> np.ndarray:
    graph.validate()
    weight = 1.0 if graph.mode == COMPLETE else graph.p
    adj = np.full((graph.n, graph.n), weight)
    np.fill_diagonal(adj, 0.0)
    return laplacian(adj)
