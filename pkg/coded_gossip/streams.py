"""Seeded random streams for reproducible simulations.

Every random draw in a run descends from one integer seed through a tree of
``numpy.random.SeedSequence`` spawn keys, so results do not depend on the
order in which trials or rounds are evaluated.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np

# Child indices used inside a single trial
NETWORK = 0
SOURCE = 1
FAULTS = 2
NODE_BASE = 3
# Run-level sub-streams that must not collide with trial indices
AUX_BASE = 2**32

T = TypeVar("T")


class Stream:
    """A node in the seed tree.

    Args:
        seed: Root integer seed (None draws fresh OS entropy)
        spawn_key: Path from the root to this node
    """

    def __init__(self, seed: Optional[int] = None, spawn_key: Tuple[int, ...] = ()):
        if seed is None:
            seed = int(np.random.SeedSequence().entropy)
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)

    def child(self, index: int) -> "Stream":
        """Return the independent sub-stream with the given index."""
        return Stream(self.seed, self.spawn_key + (int(index),))

    def round(self, t: int) -> np.random.Generator:
        """Return the generator for round t of this stream."""
        return self.child(t).generator()

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        )

    def node(self, v: int) -> "Stream":
        """Return the coding stream of node v within a trial stream."""
        return self.child(NODE_BASE + v)

    def aux(self, i: int) -> "Stream":
        """Return run-level auxiliary stream i (flood estimates, held-out checks)."""
        return self.child(AUX_BASE + i)

    def __repr__(self) -> str:
        return f"Stream(seed={self.seed}, spawn_key={self.spawn_key})"


def map_trials(fn: Callable[[int], T], count: int, threads: int = 1) -> List[T]:
    """Evaluate fn(0..count-1), optionally on worker threads.

    Results are ordered by trial index regardless of completion order.
    """
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))
