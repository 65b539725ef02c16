"""Edge-Markovian evolving graphs.

Each ordered pair (u, v) is an independent two-state chain: an absent edge is
born with probability p_birth, a present edge dies with probability p_death.
Round 1 uses the initial edge set; round t > 1 evolves the edge set of
round t - 1.
"""

from dataclasses import dataclass
from typing import FrozenSet, Sequence

import numpy as np

from . import ActiveEdgeSet, Edge, NetworkModel, validate_edges


@dataclass(frozen=True)
class EdgeMarkovian(NetworkModel):
    n: int
    p_birth: float
    p_death: float
    initial: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        for name in ("p_birth", "p_death"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        object.__setattr__(self, "initial", validate_edges(self.n, self.initial))

    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        if t == 1:
            return ActiveEdgeSet(t=t, edges=self.initial)
        previous = history[-1].edges if history else self.initial

        present = np.zeros((self.n, self.n), dtype=bool)
        for u, v in previous:
            present[u, v] = True
        coins = rng.random((self.n, self.n))
        survives = present & (coins >= self.p_death)
        born = ~present & (coins < self.p_birth)
        nxt = survives | born
        np.fill_diagonal(nxt, False)
        us, vs = np.nonzero(nxt)
        return ActiveEdgeSet(t=t, edges=frozenset(zip(us.tolist(), vs.tolist())))

    def is_iid(self) -> bool:
        return False
