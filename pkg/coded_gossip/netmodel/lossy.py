"""Independent per-edge packet loss on top of another model."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ActiveEdgeSet, NetworkModel


@dataclass(frozen=True)
class LossyWrapper(NetworkModel):
    """Drops every edge of the inner model independently with probability ``loss``.

    The inner model sees its own (pre-loss) history, so wrapping a Markovian
    model does not change the underlying graph process.
    """

    inner: NetworkModel
    loss: float

    def __post_init__(self):
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss must be in [0, 1], got {self.loss}")

    @property
    def n(self) -> int:
        return self.inner.n

    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        inner_history = [e.inner if e.inner is not None else e for e in history]
        underlying = self.inner.sample_round(t, inner_history, rng)
        ordered = underlying.ordered()
        keep = rng.random(len(ordered)) >= self.loss
        edges = frozenset(e for e, k in zip(ordered, keep.tolist()) if k)
        return ActiveEdgeSet(t=t, edges=edges, inner=underlying)

    def is_iid(self) -> bool:
        return self.inner.is_iid()
