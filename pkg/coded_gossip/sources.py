"""Correlated message sources, side information and entropy queries.

A JointSource describes k messages X_0..X_{k-1} and one side-information
variable Y_v per node, each over a finite alphabet. Nodes without side
information get a one-letter alphabet. The pmf is held either as one dense
table over (X_0..X_{k-1}, Y_0..Y_{n-1}) or factored as a message pmf times
an independent channel P(Y_v | X) per node.

All entropy queries are in bits and go through the (X_0..X_{k-1}, Y_v)
table of the queried node.
"""

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, KTooLarge, TooLarge

JOINT_TABLE_GUARD = 2**24
SUBSET_GUARD_K = 20
PMF_TOLERANCE = 1e-12
# entropies below this are treated as zero
ENTROPY_EPS = 1e-12

CapacityVector = Sequence[float]


# ---------------------------------------------------------------------------
# Entropy of pmf tables
# ---------------------------------------------------------------------------


def entropy_pmf(pmf: np.ndarray) -> float:
    """Shannon entropy in bits of a (possibly multi-dimensional) pmf table."""
    p = np.asarray(pmf, dtype=float).ravel()
    nz = p > 0
    return float(-np.sum(p[nz] * np.log2(p[nz])))


def binary_entropy(p: float) -> float:
    return entropy_pmf(np.array([p, 1.0 - p]))


def _symmetric_channel(size: int, crossover: float) -> np.ndarray:
    """P(y | x) for a channel that keeps x w.p. 1 - crossover, else a uniform other letter."""
    if size == 1:
        return np.ones((1, 1))
    off = crossover / (size - 1)
    channel = np.full((size, size), off)
    np.fill_diagonal(channel, 1.0 - crossover)
    return channel


# ---------------------------------------------------------------------------
# JointSource
# ---------------------------------------------------------------------------


@dataclass
class SampleBatch:
    """l i.i.d. draws: x has shape (k, l), y has shape (n, l)."""

    l: int  # noqa: E741
    x: np.ndarray
    y: np.ndarray


class JointSource:
    """Joint distribution of messages and per-node side information.

    Args:
        msg_alphabets: Alphabet size of each message
        side_alphabets: Alphabet size of each node's Y_v (1 = no side information)
        pmf: Dense table of shape msg_alphabets + side_alphabets, or None
        msg_pmf: Message table of shape msg_alphabets (factored form)
        channels: Per node, P(Y_v | X) of shape msg_alphabets + (|Y_v|,) (factored form)
        name: Label for summaries

    Raises:
        ValueError: If the tables have the wrong shape or do not sum to 1
        TooLarge: If a dense table exceeds the joint-table guard
    """

    def __init__(
        self,
        msg_alphabets: Sequence[int],
        side_alphabets: Sequence[int],
        pmf: Optional[np.ndarray] = None,
        msg_pmf: Optional[np.ndarray] = None,
        channels: Optional[Sequence[np.ndarray]] = None,
        name: str = "custom",
    ):
        self.msg_alphabets = tuple(int(a) for a in msg_alphabets)
        self.side_alphabets = tuple(int(a) for a in side_alphabets)
        self.name = name
        if not self.msg_alphabets:
            raise ValueError("A source needs at least one message")
        if any(a < 1 for a in self.msg_alphabets + self.side_alphabets):
            raise ValueError("Alphabet sizes must be positive")

        if pmf is not None:
            cells = math.prod(self.msg_alphabets) * math.prod(self.side_alphabets)
            if cells > JOINT_TABLE_GUARD:
                raise TooLarge(f"Dense pmf with {cells} cells exceeds the guard of 2^24")
            pmf = np.asarray(pmf, dtype=float)
            expected = self.msg_alphabets + self.side_alphabets
            if pmf.shape != expected:
                raise ValueError(f"pmf has shape {pmf.shape}, expected {expected}")
            self._check_pmf(pmf, "pmf")
            self.pmf, self.msg_pmf, self.channels = pmf, None, None
        else:
            if msg_pmf is None or channels is None:
                raise ValueError("Give either a dense pmf or msg_pmf with channels")
            msg_pmf = np.asarray(msg_pmf, dtype=float)
            if msg_pmf.shape != self.msg_alphabets:
                raise ValueError(
                    f"msg_pmf has shape {msg_pmf.shape}, expected {self.msg_alphabets}"
                )
            self._check_pmf(msg_pmf, "msg_pmf")
            if len(channels) != len(self.side_alphabets):
                raise ValueError(
                    f"Expected {len(self.side_alphabets)} channels, got {len(channels)}"
                )
            checked = []
            for v, (ch, size) in enumerate(zip(channels, self.side_alphabets)):
                ch = np.asarray(ch, dtype=float)
                if ch.shape != self.msg_alphabets + (size,):
                    raise ValueError(f"Channel of node {v} has shape {ch.shape}")
                if np.any(ch < 0) or not np.allclose(ch.sum(axis=-1), 1.0, atol=1e-9):
                    raise ValueError(f"Channel of node {v} is not a conditional pmf")
                checked.append(ch)
            self.pmf, self.msg_pmf, self.channels = None, msg_pmf, tuple(checked)

    @staticmethod
    def _check_pmf(table: np.ndarray, label: str) -> None:
        if np.any(table < 0):
            raise ValueError(f"{label} has negative entries")
        total = float(table.sum())
        if abs(total - 1.0) > PMF_TOLERANCE * max(1, table.size):
            raise ValueError(f"{label} sums to {total!r}, not 1")

    @property
    def k(self) -> int:
        return len(self.msg_alphabets)

    @property
    def node_count(self) -> int:
        return len(self.side_alphabets)

    @property
    def factored(self) -> bool:
        return self.pmf is None

    def message_pmf(self) -> np.ndarray:
        if self.factored:
            return self.msg_pmf
        return self.pmf.sum(axis=tuple(range(self.k, self.k + self.node_count)))

    def joint_with(self, v: Optional[int]) -> np.ndarray:
        """Table over (X_0..X_{k-1}, Y_v); v=None gives a constant Y."""
        if v is None:
            return self.message_pmf()[..., None]
        if not 0 <= v < self.node_count:
            raise ValueError(f"Node {v} is outside [0, {self.node_count})")
        if self.factored:
            return self.msg_pmf[..., None] * self.channels[v]
        others = tuple(self.k + w for w in range(self.node_count) if w != v)
        return self.pmf.sum(axis=others)

    def __repr__(self) -> str:
        return (
            f"JointSource({self.name}, k={self.k}, n={self.node_count}, "
            f"alphabets={self.msg_alphabets})"
        )


# ---------------------------------------------------------------------------
# Entropy queries
# ---------------------------------------------------------------------------


def _normalize_set(source: JointSource, msg_set) -> Tuple[int, ...]:
    if msg_set is None:
        return tuple(range(source.k))
    out = tuple(sorted(set(int(i) for i in msg_set)))
    if any(not 0 <= i < source.k for i in out):
        raise ValueError(f"Message set {out} is outside [0, {source.k})")
    return out


def joint_entropy(source: JointSource, msg_set=None, v: Optional[int] = None) -> float:
    """H(X_S, Y_v) in bits (H(X_S) when v is None)."""
    msgs = _normalize_set(source, msg_set)
    table = source.joint_with(v)
    drop = tuple(i for i in range(source.k) if i not in msgs)
    return entropy_pmf(table.sum(axis=drop) if drop else table)


def entropy(source: JointSource, msg_set=None) -> float:
    """H(X_S) in bits."""
    return joint_entropy(source, msg_set, None)


def cond_entropy(source: JointSource, msg_set, v: Optional[int]) -> float:
    """H(X_S | X_{S complement}, Y_v) in bits; H(empty | .) = 0."""
    msgs = _normalize_set(source, msg_set)
    if not msgs:
        return 0.0
    rest = [i for i in range(source.k) if i not in msgs]
    value = joint_entropy(source, None, v) - joint_entropy(source, rest, v)
    return max(value, 0.0)


def _check_subset_count(k: int) -> None:
    if k > SUBSET_GUARD_K:
        raise KTooLarge(f"2^{k} message subsets exceed the enumeration guard (k <= 20)")


def sw_sufficient(source: JointSource, v: Optional[int], cap: CapacityVector) -> bool:
    """True iff sum_{i in S} c_i >= H(X_S | X_S-bar, Y_v) for every nonempty S.

    Raises:
        KTooLarge: If k exceeds 20
        ValueError: If cap has the wrong length or negative entries
    """
    k = source.k
    _check_subset_count(k)
    cap = [float(c) for c in cap]
    if len(cap) != k:
        raise ValueError(f"Capacity vector has {len(cap)} entries, source has {k} messages")
    if any(c < 0 for c in cap):
        raise ValueError("Capacities must be nonnegative")
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(k), size):
            need = cond_entropy(source, subset, v)
            if sum(cap[i] for i in subset) < need - 1e-9:
                return False
    return True


def _rank_needed(
    source: JointSource,
    subset: Tuple[int, ...],
    v: Optional[int],
    l: int,  # noqa: E741
    s: float,
    delta: float,
) -> int:
    h = cond_entropy(source, subset, v)
    if h <= ENTROPY_EPS:
        return 0
    positive = sum(1 for i in subset if entropy(source, [i]) > ENTROPY_EPS)
    # tolerance so 10 * 1.1 rounds to 11, not 12
    return max(0, math.ceil((l / s) * (h + positive * delta) - 1e-9))


def decode_threshold(
    source: JointSource,
    v: Optional[int],
    l: int,  # noqa: E741
    s: float,
    delta: float,
    max_rank: Optional[int] = None,
) -> int:
    """Rank node v needs before declaring all messages decodable.

    ceil((l/s) (H(X_0..X_{k-1} | Y_v) + k' delta)), where k' counts the
    messages of nonzero entropy. Zero conditional entropy gives 0.

    Args:
        source: Joint source
        v: Decoding node (None: no side information)
        l: Block length
        s: Packet payload in bits
        delta: Rate slack per message
        max_rank: Clamp to the header dimension when given
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    threshold = _rank_needed(source, tuple(range(source.k)), v, l, s, delta)
    return min(threshold, max_rank) if max_rank is not None else threshold


def subset_thresholds(
    source: JointSource,
    v: Optional[int],
    l: int,  # noqa: E741
    s: float,
    delta: float,
    column_counts: Optional[Sequence[int]] = None,
) -> Dict[Tuple[int, ...], int]:
    """Rank requirement of every nonempty message subset S at node v.

    S needs ceil((l/s) (H(X_S | X_S-bar, Y_v) + k_S delta)) independent
    equations once its header columns are isolated, k_S counting the
    nonzero-entropy messages of S. The full set comes first; subsets that
    need nothing are left out.

    Args:
        source: Joint source
        v: Decoding node (None: no side information)
        l: Block length
        s: Packet payload in bits
        delta: Rate slack per message
        column_counts: Header columns per message; clamps each requirement

    Raises:
        KTooLarge: If k exceeds 20
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    k = source.k
    _check_subset_count(k)
    out: Dict[Tuple[int, ...], int] = {}
    for size in range(k, 0, -1):
        for subset in itertools.combinations(range(k), size):
            need = _rank_needed(source, subset, v, l, s, delta)
            if column_counts is not None:
                need = min(need, sum(column_counts[i] for i in subset))
            if need > 0:
                out[subset] = need
    return out


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _draw(table: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    flat = table.ravel()
    return rng.choice(flat.size, size=size, p=flat / flat.sum())


def _draw_conditional(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a (l, |Y|) array of conditional pmfs."""
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0])[:, None]
    return np.minimum((u >= cdf).sum(axis=1), rows.shape[1] - 1)


def sample_iid(source: JointSource, l: int, rng: np.random.Generator) -> SampleBatch:  # noqa: E741
    """Draw l i.i.d. columns of (X_0..X_{k-1}, Y_0..Y_{n-1})."""
    if l < 1:
        raise ValueError(f"l must be at least 1, got {l}")
    k, n = source.k, source.node_count
    if source.factored:
        x = np.array(np.unravel_index(_draw(source.msg_pmf, l, rng), source.msg_alphabets))
        y = np.zeros((n, l), dtype=np.int64)
        for v, channel in enumerate(source.channels):
            if source.side_alphabets[v] > 1:
                y[v] = _draw_conditional(channel[tuple(x)], rng)
    else:
        shape = source.msg_alphabets + source.side_alphabets
        cols = np.array(np.unravel_index(_draw(source.pmf, l, rng), shape))
        x, y = cols[:k], cols[k:]
    return SampleBatch(
        l=l,
        x=np.asarray(x, dtype=np.int64).reshape(k, l),
        y=np.asarray(y, dtype=np.int64).reshape(n, l),
    )


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

SideInfo = Union[None, Dict[int, Optional[float]], List[Optional[float]]]


def _side_crossovers(side_info: SideInfo, n: int) -> List[Optional[float]]:
    """Per-node crossover of the Y_v channel, None for no side information.

    A mapping assigns nodes explicitly; a list is repeated cyclically over
    the nodes (node v gets entry v mod len).
    """
    if side_info is None:
        return [None] * n
    if isinstance(side_info, dict):
        out: List[Optional[float]] = [None] * n
        for node, p in side_info.items():
            node = int(node)
            if not 0 <= node < n:
                raise ValueError(f"side_info names node {node} outside [0, {n})")
            out[node] = p
        return out
    entries = list(side_info)
    if not entries:
        return [None] * n
    return [entries[v % len(entries)] for v in range(n)]


def _side_channels(
    msg_alphabets: Tuple[int, ...], side_info: SideInfo, n: int
) -> Tuple[List[np.ndarray], List[int]]:
    """Channels in which Y_v observes X_0 through a symmetric channel."""
    a0 = msg_alphabets[0]
    channels, sizes = [], []
    for p in _side_crossovers(side_info, n):
        if p is None:
            channels.append(np.ones(msg_alphabets + (1,)))
            sizes.append(1)
            continue
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"Side-information crossover must be in [0, 1], got {p}")
        base = _symmetric_channel(a0, p)  # (|X_0|, |Y|)
        shape = (a0,) + (1,) * (len(msg_alphabets) - 1) + (a0,)
        channels.append(np.broadcast_to(base.reshape(shape), msg_alphabets + (a0,)).copy())
        sizes.append(a0)
    return channels, sizes


def independent_uniform(
    k: int, n: int, alphabet: int = 2, side_info: SideInfo = None
) -> JointSource:
    msg_alphabets = (alphabet,) * k
    msg_pmf = np.full(msg_alphabets, 1.0 / alphabet**k)
    channels, sizes = _side_channels(msg_alphabets, side_info, n)
    return JointSource(msg_alphabets, sizes, msg_pmf=msg_pmf, channels=channels,
                       name="independent_uniform")


def dsbs(crossover: float, n: int, side_info: SideInfo = None) -> JointSource:
    """A uniform bit X_0 with Y_v = X_0 through BSC(p_v).

    With side_info None every node gets BSC(crossover).
    """
    if side_info is None:
        side_info = [crossover]
    source = independent_uniform(1, n, alphabet=2, side_info=side_info)
    source.name = "dsbs"
    return source


def symmetric_bits(k: int, correlation: float, n: int, side_info: SideInfo = None) -> JointSource:
    """X_i = Z xor N_i with Z a uniform bit and N_i ~ Bernoulli(correlation) i.i.d.

    correlation 0 makes all messages equal; 0.5 makes them independent.
    """
    if not 0.0 <= correlation <= 1.0:
        raise ValueError(f"correlation must be in [0, 1], got {correlation}")
    msg_alphabets = (2,) * k
    msg_pmf = np.zeros(msg_alphabets)
    for bits in itertools.product((0, 1), repeat=k):
        total = 0.0
        for z in (0, 1):
            flips = sum(b != z for b in bits)
            total += 0.5 * correlation**flips * (1 - correlation) ** (k - flips)
        msg_pmf[bits] = total
    channels, sizes = _side_channels(msg_alphabets, side_info, n)
    return JointSource(msg_alphabets, sizes, msg_pmf=msg_pmf, channels=channels,
                       name="symmetric_bits")


def deterministic(k: int, n: int, value: int = 0, alphabet: int = 2) -> JointSource:
    msg_alphabets = (alphabet,) * k
    msg_pmf = np.zeros(msg_alphabets)
    msg_pmf[(value,) * k] = 1.0
    channels, sizes = _side_channels(msg_alphabets, None, n)
    return JointSource(msg_alphabets, sizes, msg_pmf=msg_pmf, channels=channels,
                       name="deterministic")


def load_source(file_path: str, n: int) -> JointSource:
    """Load a source from a JSON file.

    Either a dense table::

        {"messages": [2, 2], "side": [1, 2, ...], "pmf": [[...]]}

    (``side`` may be omitted for no side information; otherwise it lists
    |Y_v| for all n nodes) or a named family::

        {"family": "dsbs", "params": {"crossover": 0.11}}

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the JSON is malformed or describes an invalid source
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"Source file not found: {file_path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{file_path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")

    if not isinstance(data, dict):
        raise ConfigError(f"{file_path}: expected a JSON object")
    if "family" in data:
        return build_source(dict(data.get("params") or {}, family=data["family"]), n)
    try:
        messages = data["messages"]
        side = data.get("side") or [1] * n
        if len(side) != n:
            raise ConfigError(f"{file_path}: 'side' lists {len(side)} nodes, model has {n}")
        return JointSource(messages, side, pmf=np.array(data["pmf"], dtype=float), name="dense")
    except KeyError as e:
        raise ConfigError(f"{file_path}: missing key {e}")
    except ValueError as e:
        raise ConfigError(f"{file_path}: {e}")


def build_source(config: dict, n: int) -> JointSource:
    """Build a source from the ``source`` config section.

    Raises:
        ConfigError: On an unknown family or invalid parameters
    """
    family = config.get("family", "independent_uniform")
    side_info = config.get("side_info")
    try:
        if family == "independent_uniform":
            return independent_uniform(
                int(config.get("k", 1)), n, int(config.get("alphabet", 2)), side_info
            )
        elif family == "dsbs":
            return dsbs(float(config.get("crossover", 0.11)), n, side_info)
        elif family == "symmetric_bits":
            return symmetric_bits(
                int(config.get("k", 2)), float(config.get("correlation", 0.1)), n, side_info
            )
        elif family == "deterministic":
            return deterministic(int(config.get("k", 1)), n)
        elif family == "dense":
            file_path = config.get("file")
            if not file_path:
                raise ConfigError("source.file is required for the dense family")
            return load_source(file_path, n)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"source: {e}")
    except FileNotFoundError as e:
        raise ConfigError(str(e))
    raise ConfigError(
        f"Unknown source family: {family}. Valid options are: independent_uniform, dsbs, "
        "symmetric_bits, deterministic, dense"
    )
