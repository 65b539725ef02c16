"""Oblivious network models for coded-gossip.

A model produces the active edge set E_t of every round from the round index,
its own earlier edge sets and a random generator. It never sees node state,
which is what makes it oblivious.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError

Edge = Tuple[int, int]
Mode = Literal["push", "pull", "exchange"]
MODES = ("push", "pull", "exchange")


@dataclass(frozen=True)
class ActiveEdgeSet:
    """Directed edges over which packets are delivered in round t.

    Attributes:
        t: Round index (>= 1)
        edges: Ordered pairs (u, v), u != v; u's packet reaches v
        inner: Edge set of the wrapped model, for models that wrap another
    """

    t: int
    edges: FrozenSet[Edge]
    inner: Optional["ActiveEdgeSet"] = None

    def ordered(self) -> List[Edge]:
        """Edges in a fixed order, for reproducible iteration."""
        return sorted(self.edges)

    def __len__(self) -> int:
        return len(self.edges)


class NetworkModel(ABC):
    """Base class for oblivious network models.

    Attributes:
        n: Number of nodes, ids 0..n-1
    """

    n: int

    @abstractmethod
    def sample_round(
        self, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
    ) -> ActiveEdgeSet:
        """Sample E_t.

        Args:
            t: Round index, starting at 1
            history: Edge sets this model produced for rounds 1..t-1
            rng: Generator for this round's randomness

        Returns:
            The active edge set of round t
        """
        pass

    @abstractmethod
    def is_iid(self) -> bool:
        """True if E_t is drawn independently each round from a fixed distribution."""
        pass


def sample_round(
    model: NetworkModel, t: int, history: Sequence[ActiveEdgeSet], rng: np.random.Generator
) -> ActiveEdgeSet:
    if t < 1:
        raise ValueError(f"Rounds are numbered from 1, got t={t}")
    return model.sample_round(t, history, rng)


def is_iid(model: NetworkModel) -> bool:
    return model.is_iid()


# ---------------------------------------------------------------------------
# Topologies
# ---------------------------------------------------------------------------


def complete_edges(n: int) -> FrozenSet[Edge]:
    return frozenset((u, v) for u in range(n) for v in range(n) if u != v)


def path_edges(n: int) -> FrozenSet[Edge]:
    """Directed path 0 -> 1 -> ... -> n-1."""
    return frozenset((u, u + 1) for u in range(n - 1))


def cycle_edges(n: int) -> FrozenSet[Edge]:
    return frozenset((u, (u + 1) % n) for u in range(n)) if n > 1 else frozenset()


def symmetrize(edges: Iterable[Edge]) -> FrozenSet[Edge]:
    out = set()
    for u, v in edges:
        out.add((u, v))
        out.add((v, u))
    return frozenset(out)


def validate_edges(n: int, edges: Iterable[Edge]) -> FrozenSet[Edge]:
    """Check node ids and reject self-loops.

    Raises:
        ValueError: On a self-loop or an id outside [0, n)
    """
    checked = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"Self-loop ({u}, {v}) is not allowed")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"Edge ({u}, {v}) references a node outside [0, {n})")
        checked.add((u, v))
    return frozenset(checked)


def load_edge_list(file_path: str) -> List[Edge]:
    """Load a graph from an edge-list file: one 0-indexed ``u v`` pair per line.

    Blank lines and lines starting with # are skipped.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: On a malformed line (the message names the line number)
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"Edge list file not found: {file_path}")
    edges = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{file_path}:{lineno}: expected 'u v', got '{line}'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{file_path}:{lineno}: node ids must be integers, got '{line}'")
    return edges


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------


def _graph_from_config(config: dict, n: int, directed: bool) -> FrozenSet[Edge]:
    graph = config.get("graph", "complete")
    if isinstance(graph, str) and graph == "complete":
        return complete_edges(n)
    if isinstance(graph, str) and graph == "path":
        edges = path_edges(n)
    elif isinstance(graph, str) and graph == "cycle":
        edges = cycle_edges(n)
    elif isinstance(graph, str):
        try:
            edges = load_edge_list(graph)
        except (FileNotFoundError, ValueError) as e:
            raise ConfigError(f"model.graph: {e}")
    elif isinstance(graph, list):
        edges = [tuple(pair) for pair in graph]
    else:
        raise ConfigError("model.graph must be 'complete', 'path', 'cycle', a file path or a list")
    try:
        edges = validate_edges(n, edges)
    except ValueError as e:
        raise ConfigError(f"model.graph: {e}")
    return edges if directed else symmetrize(edges)


def build_model(config: dict) -> NetworkModel:
    """Build a network model from a config mapping.

    Args:
        config: Mapping with ``type`` (uniform_gossip, random_phone_call, static,
            edge_markovian, lossy), ``n`` and type-specific keys

    Returns:
        NetworkModel instance

    Raises:
        ConfigError: If the type or its parameters are invalid
    """
    model_type = config.get("type")
    n = config.get("n")
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"model.n must be a positive integer, got {n!r}")
    mode = str(config.get("mode", "exchange")).lower()
    if mode not in MODES:
        raise ConfigError(f"model.mode must be one of {', '.join(MODES)}, got '{mode}'")
    directed = bool(config.get("directed", False))

    if model_type == "random_phone_call":
        from .gossip import RandomPhoneCall

        return RandomPhoneCall(n=n, mode=mode)
    elif model_type == "uniform_gossip":
        from .gossip import UniformGossip

        return UniformGossip.from_edges(n, _graph_from_config(config, n, directed), mode=mode)
    elif model_type == "static":
        from .static import StaticGraph

        return StaticGraph(n=n, edges=_graph_from_config(config, n, directed))
    elif model_type == "edge_markovian":
        from .markovian import EdgeMarkovian

        initial = config.get("initial", "empty")
        if initial == "empty":
            initial_edges = frozenset()
        else:
            initial_edges = _graph_from_config({"graph": initial}, n, directed=True)
        p_birth, p_death = config.get("p_birth", 0.5), config.get("p_death", 0.5)
        for name, value in (("p_birth", p_birth), ("p_death", p_death)):
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigError(f"model.{name} must be in [0, 1], got {value}")
        return EdgeMarkovian(
            n=n, p_birth=float(p_birth), p_death=float(p_death), initial=initial_edges
        )
    elif model_type == "lossy":
        from .lossy import LossyWrapper

        inner_config = dict(config.get("inner") or {})
        inner_config.setdefault("n", n)
        loss = float(config.get("loss", 0.0))
        if not 0.0 <= loss <= 1.0:
            raise ConfigError(f"model.loss must be in [0, 1], got {loss}")
        return LossyWrapper(inner=build_model(inner_config), loss=loss)
    else:
        raise ConfigError(
            f"Unknown model type: {model_type}. Valid options are: uniform_gossip, "
            "random_phone_call, static, edge_markovian, lossy"
        )
