"""Uniform gossip and its complete-graph special case, random phone calls."""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from . import MODES, ActiveEdgeSet, Edge, Mode, NetworkModel


def _partner_edges(choosers: np.ndarray, partners: np.ndarray, mode: str) -> frozenset:
    """Turn (chooser, partner) pairs into directed delivery edges."""
    edges = set()
    for u, w in zip(choosers.tolist(), partners.tolist()):
        if mode in ("push", "exchange"):
            edges.add((u, w))
        if mode in ("pull", "exchange"):
            edges.add((w, u))
    return frozenset(edges)


@dataclass(frozen=True)
class UniformGossip(NetworkModel):
    """Every node picks a uniformly random out-neighbor each round.

    PUSH sends the chooser's packet to the partner, PULL fetches the
    partner's packet, EXCHANGE does both. Nodes without neighbors stay
    silent.

    Attributes:
        n: Number of nodes
        neighbors: Sorted out-neighbors of every node
        mode: push, pull or exchange
    """

    n: int
    neighbors: Tuple[Tuple[int, ...], ...]
    mode: Mode = "exchange"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode}")
        if len(self.neighbors) != self.n:
            raise ValueError(f"Expected neighbor lists for {self.n} nodes")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge], mode: Mode = "exchange") -> "UniformGossip":
        adjacency = [set() for _ in range(n)]
        for u, v in edges:
            adjacency[u].add(v)
        return cls(n=n, neighbors=tuple(tuple(sorted(a)) for a in adjacency), mode=mode)

    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        degrees = np.array([len(nb) for nb in self.neighbors], dtype=np.int64)
        choosers = np.flatnonzero(degrees)
        if choosers.size == 0:
            return ActiveEdgeSet(t=t, edges=frozenset())
        picks = rng.integers(0, degrees[choosers])
        partners = np.array(
            [self.neighbors[u][i] for u, i in zip(choosers.tolist(), picks.tolist())],
            dtype=np.int64,
        )
        return ActiveEdgeSet(t=t, edges=_partner_edges(choosers, partners, self.mode))

    def is_iid(self) -> bool:
        return True


@dataclass(frozen=True)
class RandomPhoneCall(NetworkModel):
    """Uniform gossip on the complete graph: partners are uniform over all other nodes."""

    n: int
    mode: Mode = "exchange"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode}")

    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        if self.n < 2:
            return ActiveEdgeSet(t=t, edges=frozenset())
        choosers = np.arange(self.n, dtype=np.int64)
        partners = rng.integers(0, self.n - 1, size=self.n)
        partners = partners + (partners >= choosers)
        return ActiveEdgeSet(t=t, edges=_partner_edges(choosers, partners, self.mode))

    def is_iid(self) -> bool:
        return True
