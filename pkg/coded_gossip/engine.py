"""Round-based algebraic gossip and stopping-time measurement.

A trial samples the messages and side information, hands every source node
its messages' blocks, then runs rounds: the senders of E_t emit a random
combination of what they store, E_t delivers, and every node whose headers
meet the rank requirement of every message subset records the round.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from . import capacity, coding, sources
from .errors import ConfigError, InvariantViolation
from .field import FieldSpec
from .flooding import FloodParams
from .netmodel import ActiveEdgeSet, NetworkModel, sample_round
from .sources import JointSource
from .streams import NETWORK, SOURCE, Stream, map_trials

StopRule = Literal["node", "all"]
DecodeRule = Literal["entropy", "full"]


@dataclass
class ExperimentSpec:
    """Everything one gossip experiment needs.

    Attributes:
        model: Network model
        source: Joint source (node_count must equal model.n)
        placement: Message index -> source nodes holding it
        field: Coding field
        l: Block length
        s: Packet payload in bits
        delta: Rate slack
        epsilon: Target failure probability
        stop_rule: "node" stops when ``node`` decodes, "all" when every node has
        node: Designated node for the "node" rule
        max_rounds: Round cap per trial
        trials: Number of trials
        seed: Run seed; also the binning key
        decode_rule: "entropy" needs the conditional-entropy rank of every
            message subset, "full" requires the whole header
        check_consistency: Verify every delivered packet against the true blocks
        trace_nodes: Nodes whose rank is recorded after every round
    """

    model: NetworkModel
    source: JointSource
    placement: Dict[int, Tuple[int, ...]]
    field: FieldSpec
    l: int  # noqa: E741
    s: float
    delta: float
    epsilon: float
    stop_rule: StopRule = "all"
    node: int = 0
    max_rounds: int = 1000
    trials: int = 100
    seed: int = 0
    decode_rule: DecodeRule = "entropy"
    check_consistency: bool = False
    trace_nodes: Tuple[int, ...] = ()

    def __post_init__(self):
        n = self.model.n
        if self.source.node_count != n:
            raise ConfigError(
                f"Source describes {self.source.node_count} nodes, model has {n}"
            )
        for i in range(self.source.k):
            holders = self.placement.get(i, ())
            if not holders:
                raise ConfigError(f"placement: message {i} is not given to any node")
            if any(not 0 <= v < n for v in holders):
                raise ConfigError(f"placement: message {i} names a node outside [0, {n})")
        extra = set(self.placement) - set(range(self.source.k))
        if extra:
            raise ConfigError(f"placement: unknown message indices {sorted(extra)}")
        for name in ("l", "s", "delta", "epsilon", "max_rounds", "trials"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.stop_rule not in ("node", "all"):
            raise ConfigError(f"stop_rule must be 'node' or 'all', got '{self.stop_rule}'")
        if self.decode_rule not in ("entropy", "full"):
            raise ConfigError(f"decode_rule must be 'entropy' or 'full', got '{self.decode_rule}'")
        if not 0 <= self.node < n:
            raise ConfigError(f"node {self.node} is outside [0, {n})")

    def layout(self) -> coding.BlockLayout:
        return coding.block_layout(self.source, self.l, self.field, self.s, self.delta, self.seed)

    def thresholds(self, layout: coding.BlockLayout) -> List[int]:
        if self.decode_rule == "full":
            return [layout.dim] * self.model.n
        return [
            sources.decode_threshold(
                self.source, v, self.l, self.s, self.delta, max_rank=layout.dim
            )
            for v in range(self.model.n)
        ]

    def requirements(self, layout: coding.BlockLayout) -> List[Dict[Tuple[int, ...], int]]:
        """Per node, the rank each message subset needs (full set first)."""
        if self.decode_rule == "full":
            return [{tuple(range(self.source.k)): layout.dim}] * self.model.n
        counts = [code.block_count for code in layout.codes]
        return [
            sources.subset_thresholds(
                self.source, v, self.l, self.s, self.delta, column_counts=counts
            )
            for v in range(self.model.n)
        ]


@dataclass
class TrialResult:
    """Outcome of one trial.

    Attributes:
        decode_rounds: Per node, the first round it could decode (0 = before
            any communication, None = timeout)
        thresholds: Per-node rank thresholds
        rank_traces: Rank after each round (index 0: initial) of the traced nodes
        rounds: Rounds simulated
        stop_time: Stopping time under the experiment's stop rule (None = timeout)
    """

    decode_rounds: List[Optional[int]]
    thresholds: List[int]
    rank_traces: Dict[int, List[int]] = field(default_factory=dict)
    rounds: int = 0
    stop_time: Optional[int] = None


def _stop_time(spec: ExperimentSpec, decode_rounds: Sequence[Optional[int]]) -> Optional[int]:
    if spec.stop_rule == "node":
        return decode_rounds[spec.node]
    if any(r is None for r in decode_rounds):
        return None
    return max(decode_rounds)


def run_trial(spec: ExperimentSpec, stream: Stream) -> TrialResult:
    """Simulate one trial.

    Within round t every sender of E_t emits before anything is delivered,
    and deliveries happen in sorted edge order. Each node draws its
    coefficients from its own per-round stream, so a node's packet does not
    depend on which other nodes send.

    Raises:
        InvariantViolation: If check_consistency is on and a packet disagrees
            with the true blocks
    """
    n = spec.model.n
    layout = spec.layout()
    batch = sources.sample_iid(spec.source, spec.l, stream.child(SOURCE).generator())
    truth = layout.true_blocks(batch.x)

    states = [coding.NodeState(v, layout, y=batch.y[v]) for v in range(n)]
    for i, holders in sorted(spec.placement.items()):
        cols = layout.columns(i)
        for v in holders:
            states[v].add_source(i, truth[cols.start : cols.stop])

    thresholds = spec.thresholds(layout)
    needs = spec.requirements(layout)
    decode_rounds: List[Optional[int]] = [
        0 if coding.can_decode_joint(states[v], needs[v]) else None for v in range(n)
    ]
    traces = {v: [states[v].rank] for v in spec.trace_nodes}
    result = TrialResult(decode_rounds=decode_rounds, thresholds=thresholds, rank_traces=traces)

    network = stream.child(NETWORK)
    history: List[ActiveEdgeSet] = []
    t = 0
    while _stop_time(spec, decode_rounds) is None and t < spec.max_rounds:
        t += 1
        active = sample_round(spec.model, t, history, network.round(t))
        history.append(active)
        ordered = active.ordered()

        senders = sorted({u for u, _ in ordered})
        packets = {u: coding.make_packet(states[u], stream.node(u).round(t)) for u in senders}
        if spec.check_consistency:
            for u, pkt in packets.items():
                if not coding.check_packet(pkt, truth, layout.spec):
                    raise InvariantViolation(
                        f"Round {t}: packet of node {u} does not match the true blocks"
                    )

        for u, v in ordered:
            coding.receive(states[v], packets[u])

        for v in range(n):
            if decode_rounds[v] is None and coding.can_decode_joint(states[v], needs[v]):
                decode_rounds[v] = t
        for v in spec.trace_nodes:
            traces[v].append(states[v].rank)

    result.rounds = t
    result.stop_time = _stop_time(spec, decode_rounds)
    return result


# ---------------------------------------------------------------------------
# Distributions and bounds
# ---------------------------------------------------------------------------


def empirical_quantile(values, p: float) -> float:
    """Smallest x with empirical P[X <= x] >= p."""
    data = np.sort(np.asarray(values, dtype=float))
    if data.size == 0:
        return float("nan")
    idx = min(max(math.ceil(p * data.size) - 1, 0), data.size - 1)
    return float(data[idx])


def _round_bound(params: FloodParams, rank: float, epsilon: float, extra: float = 0.0) -> float:
    log_eps = math.log(1.0 / epsilon, params.q)
    return params.T + (rank + log_eps + extra) / params.alpha


def spreading_bound(params: FloodParams, k: int, epsilon: float) -> float:
    """T + (1/alpha)(k + log_q 1/epsilon): k uncorrelated messages reach every node."""
    return _round_bound(params, k, epsilon)


def side_info_bound(params: FloodParams, threshold: int, epsilon: float) -> float:
    """T + (1/alpha)(threshold + log_q 1/epsilon + 3) for one source with side information."""
    return _round_bound(params, threshold, epsilon, extra=3.0)


def joint_decoding_bound(params: FloodParams, threshold: int, epsilon: float) -> float:
    """T + (1/alpha)(joint threshold + log_q 1/epsilon + 3) for correlated sources."""
    return _round_bound(params, threshold, epsilon, extra=3.0)


BOUNDS = ("none", "spreading", "side_info", "joint", "theorem5")


def experiment_bound(
    spec: ExperimentSpec,
    kind: str,
    params: FloodParams,
    layout: coding.BlockLayout,
    cap: Optional[Sequence[float]] = None,
    delta_inner: Optional[float] = None,
    delta_outer: Optional[float] = None,
) -> Optional[float]:
    """Bound for the experiment's stop rule.

    The correlated bounds get epsilon/2: the other half budgets binning failure.
    "theorem5" uses the capacity vector cap and takes the worst node under
    the "all" rule; delta_inner defaults to the coding slack.

    Raises:
        ConfigError: If the kind is unknown or theorem5 has no capacity vector
        InsufficientCapacity: If cap is outside a bounded node's Slepian-Wolf region
    """
    if kind == "none":
        return None
    thresholds = spec.thresholds(layout)
    rank = thresholds[spec.node] if spec.stop_rule == "node" else max(thresholds)
    if kind == "spreading":
        return spreading_bound(params, layout.dim, spec.epsilon)
    if kind == "side_info":
        return side_info_bound(params, rank, spec.epsilon / 2)
    if kind == "joint":
        return joint_decoding_bound(params, rank, spec.epsilon / 2)
    if kind == "theorem5":
        if cap is None:
            raise ConfigError("The theorem5 bound needs a capacity vector")
        inner = spec.delta if delta_inner is None else delta_inner
        nodes = [spec.node] if spec.stop_rule == "node" else range(spec.model.n)
        return max(
            capacity.theorem5_bound(
                params, spec.source, v, cap, spec.l, spec.s, spec.epsilon / 2, inner, delta_outer
            )
            for v in nodes
        )
    raise ConfigError(f"Unknown bound: {kind}. Valid options are: {', '.join(BOUNDS)}")


@dataclass
class StoppingTimeSummary:
    """Aggregate of a run's trials.

    Timed-out trials enter the quantiles as max_rounds + 1.
    """

    trials: int
    results: List[TrialResult]
    stop_times: np.ndarray
    timeouts: int
    quantiles: Dict[float, float]
    node_quantiles: Dict[int, Dict[float, float]]
    bound: Optional[float] = None
    exceed_fraction: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "timeouts": self.timeouts,
            "quantiles": {str(p): q for p, q in self.quantiles.items()},
            "node_quantiles": {
                str(v): {str(p): q for p, q in qs.items()}
                for v, qs in self.node_quantiles.items()
            },
            "bound": self.bound,
            "exceed_fraction": self.exceed_fraction,
        }


def stopping_time_distribution(
    spec: ExperimentSpec,
    bound: Optional[float] = None,
    levels: Optional[Sequence[float]] = None,
    threads: int = 1,
) -> StoppingTimeSummary:
    """Run spec.trials trials and summarize stopping times.

    Trial i uses Stream(spec.seed).child(i); results are ordered by trial
    index whatever the thread count.

    Args:
        spec: Experiment
        bound: Round bound whose exceedance fraction is reported
        levels: Quantile levels (default 0.5, 0.9 and 1 - epsilon)
        threads: Worker threads
    """
    root = Stream(spec.seed)
    results = map_trials(lambda i: run_trial(spec, root.child(i)), spec.trials, threads)

    censor = spec.max_rounds + 1
    stop_times = np.array(
        [r.stop_time if r.stop_time is not None else censor for r in results], dtype=np.int64
    )
    levels = sorted(set(levels or (0.5, 0.9, round(1.0 - spec.epsilon, 12))))
    quantiles = {p: empirical_quantile(stop_times, p) for p in levels}

    node_quantiles = {}
    for v in range(spec.model.n):
        times = [r.decode_rounds[v] if r.decode_rounds[v] is not None else censor for r in results]
        node_quantiles[v] = {p: empirical_quantile(times, p) for p in levels}

    exceed = None
    if bound is not None:
        exceed = float(np.mean(stop_times > bound))
    return StoppingTimeSummary(
        trials=spec.trials,
        results=results,
        stop_times=stop_times,
        timeouts=int(np.sum(stop_times == censor)),
        quantiles=quantiles,
        node_quantiles=node_quantiles,
        bound=bound,
        exceed_fraction=exceed,
    )


def default_placement(k: int, n: int) -> Dict[int, Tuple[int, ...]]:
    """Message i at node i mod n."""
    return {i: (i % n,) for i in range(k)}


def parse_placement(raw, k: int, n: int) -> Dict[int, Tuple[int, ...]]:
    """Placement from config: None for the default, or {message: node | [nodes]}."""
    if raw is None:
        return default_placement(k, n)
    if not isinstance(raw, dict):
        raise ConfigError("placement must be a mapping of message index to node list")
    out = {}
    for key, nodes in raw.items():
        try:
            i = int(key)
            nodes = (nodes,) if isinstance(nodes, int) else tuple(int(v) for v in nodes)
        except (TypeError, ValueError):
            raise ConfigError(f"placement.{key}: expected a node id or a list of node ids")
        out[i] = nodes
    return out
