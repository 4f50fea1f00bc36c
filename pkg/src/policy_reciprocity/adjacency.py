"""State adjacency: comparing partial views and fusing values across them.

Two local states are compared by lifting both into global coordinates and
counting coordinate slots where they disagree.  A coordinate observed by
exactly one side counts as a disagreement; a coordinate observed by
neither side does not.  States within a configured disagreement level of
an anchor form its adjacency space, and a value estimate at the anchor is
aggregated from table entries at those states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolationError, NoAdjacentStateError
from .mdp import LocalState, lift
from .validation import check_choice, check_scalar

SOFTMAX_WEIGHTED = "softmax_weighted"
SIMPLE_AVERAGE = "simple_average"
CUSTOM_DIGITAL = "custom_digital"
ADJACENCY_MODES = (SOFTMAX_WEIGHTED, SIMPLE_AVERAGE, CUSTOM_DIGITAL)


@dataclass(frozen=True)
class AdjacencyConfig:
    """How adjacency spaces are built and weighted.

    level : int >= 0
        Maximum lifted-coordinate disagreement for membership (ignored by
        the digital index convention).
    mode : str
        ``softmax_weighted`` — weights proportional to exp(d - rho);
        ``simple_average``   — uniform weights over members;
        ``custom_digital``   — members are the states whose single
        coordinate differs by exactly 1 from the anchor (non-wrapping,
        anchor excluded), averaged uniformly.
    """

    level: int = 1
    mode: str = SIMPLE_AVERAGE

    def validate(self) -> "AdjacencyConfig":
        check_scalar(self.level, "adjacency.level", low=0, integral=True)
        check_choice(self.mode, "adjacency.mode", ADJACENCY_MODES)
        return self


@dataclass(frozen=True)
class AdjacencySpace:
    """An anchor plus its admissible neighbors tagged with disagreement."""

    anchor: LocalState
    members: tuple  # tuple of (LocalState, int) pairs, candidate order

    def __len__(self) -> int:
        return len(self.members)


def l0_distance(x: LocalState, y: LocalState) -> int:
    """Count lifted coordinates on which two partial views disagree.

    Both states must describe the same global coordinate space.  A slot
    observed by exactly one of the two views always disagrees; a slot
    observed by neither never does.
    """
    if x.obs.d != y.obs.d:
        raise ContractViolationError(
            f"cannot compare views over d={x.obs.d} and d={y.obs.d} "
            "coordinates")
    lx, ly = lift(x), lift(y)
    return sum(1 for a, b in zip(lx, ly) if a != b)


def build_adjacency_space(anchor: LocalState, candidates,
                          cfg: AdjacencyConfig) -> AdjacencySpace:
    """Filter candidates down to the anchor's adjacency space.

    Candidate order is preserved (callers enumerate state spaces in index
    order, which makes the result deterministic).  Under the default
    modes a candidate is a member when its disagreement with the anchor
    is at most ``cfg.level``; the anchor itself (disagreement 0) is a
    member whenever it appears among the candidates.  Under the digital
    convention members are the states whose single coordinate sits at
    anchor value +/- 1.
    """
    cfg.validate()
    members = []
    if cfg.mode == CUSTOM_DIGITAL:
        if anchor.obs.n_observed != 1:
            raise ContractViolationError(
                "custom_digital adjacency expects single-coordinate states, "
                f"anchor observes {anchor.obs.n_observed}")
        for cand in candidates:
            if cand.obs.n_observed != 1:
                raise ContractViolationError(
                    "custom_digital adjacency expects single-coordinate "
                    "candidates")
            if abs(cand.values[0] - anchor.values[0]) == 1:
                members.append((cand, 1))
    else:
        for cand in candidates:
            rho = l0_distance(anchor, cand)
            if rho <= cfg.level:
                members.append((cand, rho))
    return AdjacencySpace(anchor=anchor, members=tuple(members))


def adjacency_weights(space: AdjacencySpace, mode: str) -> np.ndarray:
    """Normalized member weights for the given aggregation mode."""
    check_choice(mode, "adjacency.mode", ADJACENCY_MODES)
    n = len(space)
    if n == 0:
        raise NoAdjacentStateError(
            f"no states adjacent to anchor {space.anchor.values}")
    if mode == SOFTMAX_WEIGHTED:
        d = space.anchor.obs.d
        raw = np.array([math.exp(d - rho) for _, rho in space.members])
        return raw / raw.sum()
    return np.full(n, 1.0 / n)


def q_sharp(space: AdjacencySpace, q_lookup, action: int, mode: str) -> float:
    """Aggregate a table's values over an adjacency space at one action.

    ``q_lookup(local_state, action)`` must return the scalar table entry
    for a member state.  Raises :class:`NoAdjacentStateError` when the
    space is empty — the caller decides whether that peer is skipped.
    """
    weights = adjacency_weights(space, mode)
    total = 0.0
    for (member, _), w in zip(space.members, weights):
        total += w * float(q_lookup(member, action))
    return total
