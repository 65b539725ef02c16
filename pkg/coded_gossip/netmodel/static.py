"""A fixed edge set, active every round."""

from dataclasses import dataclass
from typing import FrozenSet, Sequence

import numpy as np

from . import ActiveEdgeSet, Edge, NetworkModel, validate_edges


@dataclass(frozen=True)
class StaticGraph(NetworkModel):
    n: int
    edges: FrozenSet[Edge]

    def __post_init__(self):
        object.__setattr__(self, "edges", validate_edges(self.n, self.edges))

    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        return ActiveEdgeSet(t=t, edges=self.edges)

    def is_iid(self) -> bool:
        return True
