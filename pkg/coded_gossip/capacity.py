"""Time-expanded graphs, fractional capacity feasibility and the capacity bounds.

The time-expanded graph has a copy (v, t) of every node for t = 0..T, a
memory arc (v, t-1) -> (v, t) of unbounded capacity and a unit arc
(u, t-1) -> (v, t) for every (u, v) in E_t. Paths in it are exactly the
time-respecting paths that valid weighted path sets are built from.

Rational demands are scaled by the common denominator D so everything runs
as integral max-flow (Dinic) from a super-source to (d, T).
"""

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from . import sources
from .errors import (
    ConfigError,
    DenominatorTooLarge,
    InsufficientCapacity,
    SimulationTimeout,
)
from .flooding import FloodParams
from .netmodel import ActiveEdgeSet, Edge, NetworkModel, sample_round
from .sources import JointSource
from .streams import NETWORK, Stream

INF = 1 << 60
DEFAULT_MAX_DENOMINATOR = 1024


# ---------------------------------------------------------------------------
# Dinic max-flow
# ---------------------------------------------------------------------------


class FlowNetwork:
    """Integral flow network with paired residual arcs.

    Arc e and its reverse e ^ 1 are stored next to each other; ``flow``
    is antisymmetric across the pair. Vertices and arcs can be added after
    flow has been pushed, which is how the time-expanded graph grows.
    """

    def __init__(self, vertices: int = 0):
        self.adj: List[List[int]] = [[] for _ in range(vertices)]
        self.head: List[int] = []
        self.cap: List[int] = []
        self.flow: List[int] = []

    @property
    def vertex_count(self) -> int:
        return len(self.adj)

    def add_vertices(self, count: int) -> int:
        """Add count vertices; returns the id of the first."""
        first = len(self.adj)
        self.adj.extend([] for _ in range(count))
        return first

    def add_arc(self, u: int, v: int, cap: int) -> int:
        e = len(self.head)
        self.head += [v, u]
        self.cap += [cap, 0]
        self.flow += [0, 0]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def push(self, e: int, amount: int) -> None:
        self.flow[e] += amount
        self.flow[e ^ 1] -= amount

    def residual(self, e: int) -> int:
        return self.cap[e] - self.flow[e]

    def _levels(self, s: int, t: int) -> Optional[List[int]]:
        level = [-1] * len(self.adj)
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self.adj[u]:
                v = self.head[e]
                if level[v] < 0 and self.residual(e) > 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _blocking(self, u: int, t: int, pushed: int, level: List[int], it: List[int]) -> int:
        if u == t:
            return pushed
        arcs = self.adj[u]
        while it[u] < len(arcs):
            e = arcs[it[u]]
            v = self.head[e]
            if level[v] == level[u] + 1 and self.residual(e) > 0:
                got = self._blocking(v, t, min(pushed, self.residual(e)), level, it)
                if got > 0:
                    self.push(e, got)
                    return got
            it[u] += 1
        return 0

    def augment(self, s: int, t: int, limit: int = INF) -> int:
        """Push up to limit more units from s to t on top of the current flow.

        Returns:
            The amount added
        """
        total = 0
        while total < limit:
            level = self._levels(s, t)
            if level is None:
                break
            it = [0] * len(self.adj)
            while total < limit:
                got = self._blocking(s, t, limit - total, level, it)
                if got == 0:
                    break
                total += got
        return total


# ---------------------------------------------------------------------------
# Time-expanded graph
# ---------------------------------------------------------------------------


class TimeExpandedGraph:
    """Node copies (v, t) for t = 0..T over the active edge sets E_1..E_T.

    Attributes:
        n: Number of nodes
        edges: E_1..E_T as frozensets of (u, v)
    """

    def __init__(self, n: int, edges: Iterable[Iterable[Edge]] = ()):
        self.n = n
        self.edges: List[frozenset] = []
        for e in edges:
            self.append(e)

    @property
    def T(self) -> int:
        return len(self.edges)

    def append(self, edges: Iterable[Edge]) -> None:
        if isinstance(edges, ActiveEdgeSet):
            edges = edges.edges
        checked = frozenset((int(u), int(v)) for u, v in edges)
        for u, v in checked:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"Invalid edge ({u}, {v}) for {self.n} nodes")
        self.edges.append(checked)

    def arcs(self) -> List[Tuple[Tuple[int, int], Tuple[int, int], str]]:
        """All arcs as ((u, t-1), (v, t), kind), kind 'memory' or 'edge'."""
        out = []
        for t, active in enumerate(self.edges, 1):
            for v in range(self.n):
                out.append(((v, t - 1), (v, t), "memory"))
            for u, v in sorted(active):
                out.append(((u, t - 1), (v, t), "edge"))
        return out

    def __repr__(self) -> str:
        return f"TimeExpandedGraph(n={self.n}, T={self.T}, edges={sum(map(len, self.edges))})"


def build_time_expanded(n: int, edges: Sequence[Iterable[Edge]]) -> TimeExpandedGraph:
    return TimeExpandedGraph(n, edges)


@dataclass(frozen=True)
class CapacityDemand:
    """Rational demands c_i from sources s_i to one sink d."""

    sources: Tuple[int, ...]
    demands: Tuple[Fraction, ...]
    sink: int

    def __post_init__(self):
        if len(self.sources) != len(self.demands):
            raise ValueError(
                f"{len(self.sources)} sources but {len(self.demands)} demands"
            )
        object.__setattr__(self, "sources", tuple(int(s) for s in self.sources))
        object.__setattr__(self, "demands", tuple(to_fraction(c) for c in self.demands))
        if any(c < 0 for c in self.demands):
            raise ValueError("Demands must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.sources)

    @property
    def total(self) -> Fraction:
        return sum(self.demands, Fraction(0))

    def check_nodes(self, n: int) -> None:
        for node in self.sources + (self.sink,):
            if not 0 <= node < n:
                raise ValueError(f"Node {node} is outside [0, {n})")


def to_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, '1/2'-style string or decimal float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def capacity_vector(raw, k: int) -> List[float]:
    """Per-message capacities from config: a scalar or one-entry list is shared by all k.

    Raises:
        ConfigError: If the entries do not parse or their count is not k
    """
    values = raw if isinstance(raw, (list, tuple)) else [raw]
    if len(values) == 1:
        values = list(values) * k
    if len(values) != k:
        raise ConfigError(f"capacity.demands has {len(values)} entries, source has {k} messages")
    try:
        return [float(to_fraction(c)) for c in values]
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"capacity.demands: {e}")


def common_denominator(demand: CapacityDemand, max_denominator: int) -> int:
    """lcm of the demand denominators.

    Raises:
        DenominatorTooLarge: If it exceeds max_denominator
    """
    d = 1
    for c in demand.demands:
        d = d * c.denominator // math.gcd(d, c.denominator)
    if d > max_denominator:
        raise DenominatorTooLarge(
            f"Demands need denominator {d}, above the configured bound {max_denominator}"
        )
    return d


class WeightedPath(NamedTuple):
    source: int  # index into CapacityDemand.sources
    nodes: Tuple[int, ...]  # v_0..v_T
    weight: Fraction


class _FlowState:
    """A time-expanded flow network that grows one layer at a time.

    Vertex 0 is the super-source, 1..k the per-source hubs, then layer t
    occupies n consecutive ids. The flow always ends at (d, T).
    """

    def __init__(self, n: int, demand: CapacityDemand, scale: int):
        self.n = n
        self.demand = demand
        self.scale = scale
        self.net = FlowNetwork(1 + demand.k)
        self.layer_base: List[int] = [self.net.add_vertices(n)]
        self.memory_arcs: List[Dict[int, int]] = []
        self.value = 0
        for i, (s, c) in enumerate(zip(demand.sources, demand.demands)):
            need = int(c * scale)
            if need > 0:
                self.net.add_arc(0, 1 + i, need)
                self.net.add_arc(1 + i, self.vertex(s, 0), INF)
        self.required = int(demand.total * scale)

    @property
    def T(self) -> int:
        return len(self.layer_base) - 1

    def vertex(self, v: int, t: int) -> int:
        return self.layer_base[t] + v

    @property
    def sink(self) -> int:
        return self.vertex(self.demand.sink, self.T)

    def extend(self, edges: Iterable[Edge]) -> None:
        base = self.net.add_vertices(self.n)
        prev = self.layer_base[-1]
        self.layer_base.append(base)
        memory = {}
        for v in range(self.n):
            memory[v] = self.net.add_arc(prev + v, base + v, INF)
        for u, v in sorted(edges):
            self.net.add_arc(prev + u, base + v, self.scale)
        self.memory_arcs.append(memory)
        # carry the existing flow from the old sink to the new one
        if self.value:
            self.net.push(memory[self.demand.sink], self.value)

    def solve(self) -> bool:
        if self.value < self.required:
            self.value += self.net.augment(0, self.sink, self.required - self.value)
        return self.value >= self.required

    def decompose(self) -> List[WeightedPath]:
        """Split the current flow into weighted source-to-sink paths."""
        net = self.net
        remaining = [max(f, 0) for f in net.flow]
        layer_of = {}
        for t, base in enumerate(self.layer_base):
            for v in range(self.n):
                layer_of[base + v] = (v, t)
        paths = []
        for i in range(self.demand.k):
            hub = 1 + i
            while True:
                arc_in = next(
                    (e for e in net.adj[0] if net.head[e] == hub and remaining[e] > 0), None
                )
                if arc_in is None:
                    break
                route = [arc_in]
                u = hub
                while u != self.sink:
                    e = next(e for e in net.adj[u] if e % 2 == 0 and remaining[e] > 0)
                    route.append(e)
                    u = net.head[e]
                amount = min(remaining[e] for e in route)
                for e in route:
                    remaining[e] -= amount
                nodes = tuple(layer_of[net.head[e]][0] for e in route[1:])
                paths.append(WeightedPath(i, nodes, Fraction(amount, self.scale)))
        return paths


def feasible(
    graph: TimeExpandedGraph,
    demand: CapacityDemand,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
) -> Tuple[bool, List[WeightedPath]]:
    """Decide whether valid weighted paths achieve every demand within graph.T rounds.

    Returns:
        (feasible, witness paths). The witness is the decomposition of a
        maximum flow; it achieves every demand iff feasible is True.

    Raises:
        DenominatorTooLarge: If the demands need a denominator above max_denominator
    """
    demand.check_nodes(graph.n)
    state = _FlowState(graph.n, demand, common_denominator(demand, max_denominator))
    for active in graph.edges:
        state.extend(active)
    ok = state.solve()
    return ok, state.decompose()


def first_feasible_time(
    model: NetworkModel,
    demand: CapacityDemand,
    max_rounds: int,
    stream: Stream,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
) -> Tuple[int, List[WeightedPath], TimeExpandedGraph]:
    """Sample E_1, E_2, ... and return the first T' at which the demands are feasible.

    The flow from round T' - 1 is kept and extended, so each round costs one
    incremental augmentation. T' = 0 when every demand is met without
    communication.

    Returns:
        (T', witness paths, the sampled time-expanded graph)

    Raises:
        SimulationTimeout: If no T' <= max_rounds is feasible
    """
    demand.check_nodes(model.n)
    state = _FlowState(model.n, demand, common_denominator(demand, max_denominator))
    graph = TimeExpandedGraph(model.n)
    if state.solve():
        return 0, state.decompose(), graph

    network = stream.child(NETWORK)
    history: List[ActiveEdgeSet] = []
    for t in range(1, max_rounds + 1):
        active = sample_round(model, t, history, network.round(t))
        history.append(active)
        graph.append(active.edges)
        state.extend(active.edges)
        if state.solve():
            return t, state.decompose(), graph
    raise SimulationTimeout(
        f"Demands {format_demands(demand)} not feasible within {max_rounds} rounds",
        rounds=max_rounds,
        partial=graph,
    )


# ---------------------------------------------------------------------------
# Path validation and capacity sharing
# ---------------------------------------------------------------------------


def validate_paths(
    paths: Sequence[WeightedPath],
    edges: Sequence[Iterable[Edge]],
    demand: CapacityDemand,
) -> bool:
    """Check that paths form a valid weighted path set achieving every demand.

    Every path must have T + 1 nodes, start at its source, end at the sink
    and at each step stay put or cross an edge active in that round. The
    weights crossing any (edge, round) must sum to at most one, and the
    weights from source i to at least c_i.
    """
    rounds = [frozenset(e.edges if isinstance(e, ActiveEdgeSet) else e) for e in edges]
    T = len(rounds)
    load: Dict[Tuple[int, Edge], Fraction] = {}
    achieved = [Fraction(0)] * demand.k
    for path in paths:
        if path.weight < 0 or not 0 <= path.source < demand.k:
            return False
        nodes = path.nodes
        if len(nodes) != T + 1:
            return False
        if nodes[0] != demand.sources[path.source] or nodes[-1] != demand.sink:
            return False
        for t in range(1, T + 1):
            u, v = nodes[t - 1], nodes[t]
            if u == v:
                continue
            if (u, v) not in rounds[t - 1]:
                return False
            load[(t, (u, v))] = load.get((t, (u, v)), Fraction(0)) + path.weight
        achieved[path.source] += path.weight
    if any(w > 1 for w in load.values()):
        return False
    return all(a >= c for a, c in zip(achieved, demand.demands))


def capacity_sharing_paths(
    edges: Sequence[Iterable[Edge]], demand: CapacityDemand, n: int
) -> Optional[List[WeightedPath]]:
    """Fractional paths built from per-source disjoint bundles.

    For C = ceil(sum c_i), each source with c_i > 0 gets C unit paths that
    are edge-disjoint per round among themselves; every path from source i
    is then weighted c_i / C. Bundles of different sources may share edges,
    but each edge carries at most one path per source, so its load is at
    most sum c_i / C <= 1.

    Returns:
        The weighted paths, or None if some source lacks C disjoint paths
    """
    graph = TimeExpandedGraph(n, edges)
    bundle_size = math.ceil(demand.total)
    paths = []
    for i, (s, c) in enumerate(zip(demand.sources, demand.demands)):
        if c == 0:
            continue
        single = CapacityDemand((s,), (Fraction(bundle_size),), demand.sink)
        ok, bundle = feasible(graph, single, max_denominator=1)
        if not ok:
            return None
        share = c / bundle_size
        for path in bundle:
            # integral flow: each decomposed path carries an integer number of units
            for _ in range(int(path.weight)):
                paths.append(WeightedPath(i, path.nodes, share))
    return paths


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


def _log_q(x: float, q: int) -> float:
    return math.log(x, q) if x > 1 else 0.0


def integral_capacity_bound(params: FloodParams, demands: Sequence, epsilon: float) -> float:
    """T + (1/alpha)(sum c_i + log_q 1/epsilon) for integral demands."""
    total = float(sum(to_fraction(c) for c in demands))
    return params.T + (total + _log_q(1.0 / epsilon, params.q)) / params.alpha


def fractional_capacity_bound(params: FloodParams, demands: Sequence, epsilon: float) -> float:
    """T + (1/alpha)(ceil(sum c_i) + log_q k + log_q 1/epsilon) for fractional demands."""
    fractions = [to_fraction(c) for c in demands]
    total = math.ceil(sum(fractions, Fraction(0)))
    k = max(len(fractions), 1)
    return params.T + (
        total + _log_q(k, params.q) + _log_q(1.0 / epsilon, params.q)
    ) / params.alpha


def theorem5_bound(
    params: FloodParams,
    source: JointSource,
    v: Optional[int],
    cap: Sequence[float],
    l: int,  # noqa: E741
    s: float,
    epsilon: float,
    delta_inner: float,
    delta_outer: Optional[float] = None,
    k: Optional[int] = None,
) -> float:
    """Decode-time bound for a capacity vector sufficient at node v.

    T + (1/alpha)(ceil((l/s) sum c_i + delta_inner) + log_q k + log_q 1/epsilon
    + delta_outer), logs base q. delta_outer defaults to delta_inner.

    Raises:
        InsufficientCapacity: If cap is outside the Slepian-Wolf region of v
    """
    if not sources.sw_sufficient(source, v, cap):
        raise InsufficientCapacity(
            f"Capacity vector {list(cap)} is not sufficient for node {v}"
        )
    if delta_outer is None:
        delta_outer = delta_inner
    k = source.k if k is None else k
    rank = math.ceil((l / s) * sum(float(c) for c in cap) + delta_inner - 1e-9)
    log_terms = _log_q(k, params.q) + _log_q(1.0 / epsilon, params.q)
    return params.T + (rank + log_terms + delta_outer) / params.alpha


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def format_demands(demand: CapacityDemand) -> str:
    pairs = ", ".join(f"{s}:{c}" for s, c in zip(demand.sources, demand.demands))
    return f"[{pairs}] -> {demand.sink}"


def format_paths(paths: Sequence[WeightedPath]) -> str:
    """One ``path weight: v@t v@t ...`` line per path."""
    lines = []
    for path in paths:
        hops = " ".join(f"{v}@{t}" for t, v in enumerate(path.nodes))
        lines.append(f"path {path.weight}: {hops}")
    return "\n".join(lines) + ("\n" if lines else "")


def build_demand(config: dict, n: int) -> CapacityDemand:
    """CapacityDemand from the ``capacity`` config section."""
    sources_ = config.get("sources")
    demands = config.get("demands")
    sink = config.get("sink")
    if sink is None:
        sink = n - 1
    if sources_ is None:
        raise ConfigError("capacity.sources is required")
    if isinstance(demands, (int, float, str)):
        demands = [demands] * len(sources_)
    try:
        demand = CapacityDemand(tuple(sources_), tuple(demands or ()), int(sink))
        demand.check_nodes(n)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise ConfigError(f"capacity: {e}")
    return demand
