"""Shared test fixtures for coded-gossip."""

import itertools
import math
from collections import Counter
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pytest

from coded_gossip.field import FieldSpec
from coded_gossip.streams import Stream

# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def gf2():
    return FieldSpec(p=2)


@pytest.fixture(scope="session")
def gf3():
    return FieldSpec(p=3)


@pytest.fixture(scope="session")
def gf4():
    """GF(4) with modulus x^2 + x + 1: 2 is x, 3 is x + 1."""
    return FieldSpec(p=2, m=2)


@pytest.fixture(scope="session")
def gf9():
    return FieldSpec(p=3, m=2)


@pytest.fixture(params=[(2, 1), (3, 1), (5, 1), (2, 2), (2, 3), (3, 2)], ids=str)
def small_field(request):
    p, m = request.param
    return FieldSpec(p=p, m=m)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


@pytest.fixture
def stream():
    return Stream(1234)


@pytest.fixture
def rng():
    return np.random.default_rng(99)


# ---------------------------------------------------------------------------
# Brute-force capacity oracle
# ---------------------------------------------------------------------------


def brute_force_feasible(
    n: int,
    rounds: Sequence[Sequence[Tuple[int, int]]],
    sources: Sequence[int],
    demands: Sequence[Fraction],
    sink: int,
) -> bool:
    """Exhaustive check for tiny instances.

    Integer max-flow has an integral optimum, so for integer demands
    feasibility reduces to picking demand[i] paths per source that use every
    (edge, round) at most once. Fractional demands are scaled to integers by
    their common denominator, with every (edge, round) usable that many
    times. Paths are enumerated explicitly.
    """
    T = len(rounds)
    scale = 1
    for d in demands:
        scale = scale * Fraction(d).denominator // math.gcd(scale, Fraction(d).denominator)

    def paths_from(v: int, t: int) -> List[Tuple[Tuple[int, int, int], ...]]:
        if t == T:
            return [()] if v == sink else []
        out = [rest for rest in paths_from(v, t + 1)]
        for (a, b) in rounds[t]:
            if a == v:
                out += [((a, b, t),) + rest for rest in paths_from(b, t + 1)]
        return out

    needed: List[int] = []
    for s, d in zip(sources, demands):
        needed += [s] * int(Fraction(d) * scale)

    options: Dict[int, list] = {s: paths_from(s, 0) for s in set(sources)}
    used: Counter = Counter()

    def place(i: int, start: int) -> bool:
        if i == len(needed):
            return True
        # paths of one source are tried in non-decreasing order to skip permutations
        first = start if i > 0 and needed[i - 1] == needed[i] else 0
        paths = options[needed[i]]
        for j in range(first, len(paths)):
            path = paths[j]
            if any(used[e] >= scale for e in path):
                continue
            used.update(path)
            if place(i + 1, j):
                return True
            used.subtract(path)
        return False

    return place(0, 0)


def all_edge_sets(n: int, max_edges: int):
    """Every set of at most max_edges directed edges on n nodes."""
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    for size in range(max_edges + 1):
        yield from itertools.combinations(pairs, size)
