"""The flooding process and Monte Carlo estimation of (T, alpha).

A flood starts from a set S_1 of informed nodes. In every round the model
produces E_t, each edge independently fails with probability p_fault, and an
informed node informs the heads of its surviving out-edges. The stopping time
S_F is the first t with S_t = V.

(T, alpha) are fitted so that P[S_F >= T + k] < q^(-alpha k) for every start
node, with faults at rate 1/q.
"""

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import SimulationTimeout
from .netmodel import ActiveEdgeSet, NetworkModel, sample_round
from .streams import FAULTS, NETWORK, Stream, map_trials

DEFAULT_ALPHA_CAP = 16.0
DEFAULT_MIN_TAIL_COUNT = 5
MIN_TAIL_POINTS = 3
# trials per start below which the CLI warns
MIN_FLOOD_TRIALS = 1000
# keeps the fitted inequality strict at the observed points
STRICT_MARGIN = 1e-6


@dataclass
class FloodTrajectory:
    """Informed sets S_1, S_2, ... of one flood.

    Attributes:
        sets: S_1..S_t, monotone non-decreasing, S_1 the start set
        stop_time: First t with S_t = V, or None on timeout
    """

    sets: List[FrozenSet[int]]
    stop_time: Optional[int] = None

    @property
    def sizes(self) -> List[int]:
        return [len(s) for s in self.sets]


class TailPoint(NamedTuple):
    k: int
    t: int
    count: int
    probability: float


@dataclass
class FloodParams:
    """Fitted flooding time and throughput.

    Attributes:
        T: Flooding time in rounds
        alpha: Throughput exponent (> 0)
        q: Field size the faults were drawn at (p_fault = 1/q)
        trials: Trials per start node
        residual: RMS residual of the tail fit (0 when not fitted)
        tail: Empirical tail of the worst start node
        insufficient_tail: True when alpha was set to the cap for lack of tail points
        worst_start: Start node with the largest T (ties: smallest alpha)
        starts: Start nodes that were simulated
    """

    T: int
    alpha: float
    q: int
    trials: int
    residual: float = 0.0
    tail: List[TailPoint] = field(default_factory=list)
    insufficient_tail: bool = False
    worst_start: int = 0
    starts: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "alpha": self.alpha,
            "q": self.q,
            "trials": self.trials,
            "residual": self.residual,
            "insufficient_tail": self.insufficient_tail,
            "worst_start": self.worst_start,
        }


# ---------------------------------------------------------------------------
# Single flood
# ---------------------------------------------------------------------------


def _surviving(active: ActiveEdgeSet, p_fault: float, rng: np.random.Generator) -> List[Tuple]:
    ordered = active.ordered()
    if not ordered:
        return []
    coins = rng.random(len(ordered))
    return [e for e, c in zip(ordered, coins.tolist()) if c >= p_fault]


def _run_flood(
    model: NetworkModel,
    p_fault: float,
    start: FrozenSet[int],
    max_rounds: int,
    stream: Stream,
) -> FloodTrajectory:
    n = model.n
    network, faults = stream.child(NETWORK), stream.child(FAULTS)
    informed = frozenset(start)
    trajectory = FloodTrajectory(sets=[informed])
    history: List[ActiveEdgeSet] = []

    t = 1
    while True:
        if len(informed) == n:
            trajectory.stop_time = t
            return trajectory
        if t >= max_rounds:
            return trajectory
        active = sample_round(model, t, history, network.round(t))
        history.append(active)
        reached = {v for u, v in _surviving(active, p_fault, faults.round(t)) if u in informed}
        informed = informed | reached
        trajectory.sets.append(informed)
        t += 1


def flood(
    model: NetworkModel,
    p_fault: float,
    start: Iterable[int],
    max_rounds: int,
    stream: Stream,
) -> FloodTrajectory:
    """Run one flood from the start set.

    Runs sharing a stream see the same edge sets and the same fault coins,
    whatever their start sets.

    Args:
        model: Network model
        p_fault: Per-edge failure probability in [0, 1]
        start: Nonempty set of initially informed nodes
        max_rounds: Largest stopping time that counts as absorption
        stream: Trial stream (network randomness from child 0, faults from child 2)

    Returns:
        FloodTrajectory with stop_time set

    Raises:
        ValueError: On an empty start set or p_fault outside [0, 1]
        SimulationTimeout: If S_t != V for every t <= max_rounds; the partial
            trajectory is attached
    """
    start = frozenset(int(v) for v in start)
    if not start:
        raise ValueError("Flooding needs a nonempty start set")
    if not 0.0 <= p_fault <= 1.0:
        raise ValueError(f"p_fault must be in [0, 1], got {p_fault}")
    if not all(0 <= v < model.n for v in start):
        raise ValueError(f"Start set {sorted(start)} references a node outside [0, {model.n})")

    trajectory = _run_flood(model, p_fault, start, max_rounds, stream)
    if trajectory.stop_time is None:
        raise SimulationTimeout(
            f"Flood from {sorted(start)} did not reach all {model.n} nodes "
            f"within {max_rounds} rounds",
            rounds=max_rounds,
            partial=trajectory,
        )
    return trajectory


# ---------------------------------------------------------------------------
# Tail estimation
# ---------------------------------------------------------------------------


def flood_tail(stop_times: Sequence[int], T: int) -> List[TailPoint]:
    """Empirical P[S_F >= T + k] for k = 0, 1, ... while the count is positive."""
    times = np.asarray(stop_times, dtype=np.int64)
    total = max(len(times), 1)
    points = []
    k = 0
    while True:
        count = int(np.count_nonzero(times >= T + k))
        if count == 0:
            break
        points.append(TailPoint(k=k, t=T + k, count=count, probability=count / total))
        k += 1
    return points


def _fit_alpha(
    tail: List[TailPoint], q: int, alpha_cap: float, min_tail_count: int
) -> Tuple[float, float, bool]:
    """Conservative slope of -log_q P[S_F >= T + k] against k.

    Returns:
        (alpha, residual, insufficient_tail)
    """
    usable = [pt for pt in tail if pt.k >= 1 and pt.count >= min_tail_count]
    if len(usable) < MIN_TAIL_POINTS:
        return alpha_cap, 0.0, True

    k = np.array([pt.k for pt in usable], dtype=float)
    y = -np.log(np.array([pt.probability for pt in usable])) / np.log(q)
    sxx = float(np.dot(k, k))
    slope = float(np.dot(k, y)) / sxx
    dof = len(usable) - 1
    resid = y - slope * k
    residual = float(np.sqrt(np.dot(resid, resid) / dof))
    lower = slope - stats.t.ppf(0.95, dof) * residual / np.sqrt(sxx)

    # every observed point must satisfy the inequality, not just the fitted line
    observed = [pt for pt in tail if pt.k >= 1]
    pointwise = min(-np.log(pt.probability) / np.log(q) / pt.k for pt in observed)
    pointwise = float(pointwise) * (1.0 - STRICT_MARGIN)
    alpha = min(lower, pointwise) if lower > 0 else pointwise
    return float(min(alpha, alpha_cap)), residual, False


def _start_nodes(n: int, max_starts: Optional[int], stream: Stream) -> Tuple[int, ...]:
    if max_starts is None or n <= max_starts:
        return tuple(range(n))
    chosen = stream.generator().choice(n, size=max_starts, replace=False)
    return tuple(sorted(int(v) for v in chosen))


def _censored_stop_times(
    model: NetworkModel,
    q: int,
    start: int,
    trials: int,
    max_rounds: int,
    stream: Stream,
    threads: int,
) -> np.ndarray:
    def one(i: int) -> int:
        traj = _run_flood(model, 1.0 / q, frozenset([start]), max_rounds, stream.child(i))
        return traj.stop_time if traj.stop_time is not None else max_rounds + 1

    return np.array(map_trials(one, trials, threads), dtype=np.int64)


def estimate_flood_params(
    model: NetworkModel,
    q: int,
    trials: int,
    max_rounds: int,
    stream: Stream,
    max_starts: Optional[int] = 8,
    alpha_cap: float = DEFAULT_ALPHA_CAP,
    min_tail_count: int = DEFAULT_MIN_TAIL_COUNT,
    threads: int = 1,
) -> FloodParams:
    """Estimate (T, alpha) from floods with p_fault = 1/q.

    Every sampled start node runs the same trial streams, so starts are
    compared under coupled randomness. Timed-out runs count as stopping at
    max_rounds + 1. Per start, T is the smallest t with empirical
    P[S_F > t] < 1 and alpha a 95% lower confidence bound on the tail slope;
    the result is the worst case over starts.

    Args:
        model: Network model
        q: Field size
        trials: Trials per start node
        max_rounds: Round cap per flood
        stream: Run stream; trial i uses stream.child(i)
        max_starts: Simulate at most this many start nodes (None: all)
        alpha_cap: alpha when the tail has fewer than three usable points
        min_tail_count: Exceedances needed for a tail point to enter the fit
        threads: Worker threads for trials

    Returns:
        FloodParams for the worst start node

    Raises:
        ValueError: If q < 2 or trials < 1
        SimulationTimeout: If every trial of some start node times out
    """
    if q < 2:
        raise ValueError(f"q must be at least 2, got {q}")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")

    starts = _start_nodes(model.n, max_starts, stream.child(trials))
    per_start = []
    for start in starts:
        times = _censored_stop_times(model, q, start, trials, max_rounds, stream, threads)
        T = int(times.min())
        if T > max_rounds:
            raise SimulationTimeout(
                f"No flood from node {start} reached all {model.n} nodes "
                f"within {max_rounds} rounds in {trials} trials",
                rounds=max_rounds,
            )
        tail = flood_tail(times, T)
        alpha, residual, insufficient = _fit_alpha(tail, q, alpha_cap, min_tail_count)
        per_start.append(
            FloodParams(
                T=T,
                alpha=alpha,
                q=q,
                trials=trials,
                residual=residual,
                tail=tail,
                insufficient_tail=insufficient,
                worst_start=start,
                starts=starts,
            )
        )

    # a larger T only loosens each start's inequality, so max T with min alpha holds for all
    worst = max(per_start, key=lambda p: (p.T, -p.alpha))
    worst.T = max(p.T for p in per_start)
    worst.alpha = min(p.alpha for p in per_start)
    return worst


class FloodCheck(NamedTuple):
    passed: bool
    violations: List[Tuple[int, int, float, float]]  # (start, k, observed, bound)


def check_flood_params(
    params: FloodParams,
    model: NetworkModel,
    trials: int,
    stream: Stream,
    max_rounds: int,
    threads: int = 1,
) -> FloodCheck:
    """Check P[S_F >= T + k] < q^(-alpha k) on held-out trials.

    Uses the start nodes recorded in params and a stream the estimate did not
    use. Every k >= 1 with at least one exceedance is checked.
    """
    violations = []
    for start in params.starts or (params.worst_start,):
        times = _censored_stop_times(
            model, params.q, start, trials, max_rounds, stream, threads
        )
        for pt in flood_tail(times, params.T):
            if pt.k == 0:
                continue
            bound = float(params.q) ** (-params.alpha * pt.k)
            if pt.probability >= bound:
                violations.append((start, pt.k, pt.probability, bound))
    return FloodCheck(passed=not violations, violations=violations)
