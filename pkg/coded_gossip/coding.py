"""Random binning, block layout and random linear network coding.

Each message x_i (l symbols) is hashed to a bin index of h_i symbols in
F_q. The index is cut into blocks of ``symbols_per_block`` symbols, the
last block zero-padded, and all blocks of all messages form the coding
generation: a packet header carries one coefficient per block, the payload
is the matching combination of block contents.
"""

import hashlib
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import field, sources
from .errors import DimensionMismatch, TooLarge
from .field import FieldSpec
from .linalg import RowSpace, intersection_dim_with_columns, projection_rank
from .sources import JointSource
from .streams import Stream, map_trials

ORACLE_GUARD = 2**20


def symbols_per_block(spec: FieldSpec, s: float) -> int:
    """max(1, floor(s / log2 q)) field symbols fit one s-bit payload."""
    return max(1, int(math.floor(s / spec.bits + 1e-9)))


@dataclass(frozen=True)
class BinningCode:
    """Keyed random binning of one message.

    Attributes:
        index: Message index i
        l: Block length (source symbols per message)
        spec: Field of the bin symbols
        s: Packet payload in bits
        h: Bin-index length in field symbols
        seed: Binning key shared by every holder of the message
        alphabet: Alphabet size of X_i
    """

    index: int
    l: int  # noqa: E741
    spec: FieldSpec
    s: float
    h: int
    seed: int
    alphabet: int = 2

    @property
    def symbols_per_block(self) -> int:
        return symbols_per_block(self.spec, self.s)

    @property
    def block_count(self) -> int:
        return -(-self.h // self.symbols_per_block)

    @property
    def padded_length(self) -> int:
        return self.block_count * self.symbols_per_block

    def _key(self) -> bytes:
        return (self.seed % 2**128).to_bytes(16, "little") + self.index.to_bytes(4, "little")


def binning_code(
    source: JointSource,
    i: int,
    l: int,  # noqa: E741
    spec: FieldSpec,
    s: float,
    delta: float,
    seed: int,
) -> BinningCode:
    """Binning code for message i with h = ceil((l / log2 q) (H(X_i) + delta)).

    A zero-entropy message gets h = 0.
    """
    h_bits = sources.entropy(source, [i])
    if h_bits <= sources.ENTROPY_EPS:
        h = 0
    else:
        h = math.ceil((l / spec.bits) * (h_bits + delta) - 1e-9)
    return BinningCode(
        index=i, l=l, spec=spec, s=s, h=h, seed=int(seed), alphabet=source.msg_alphabets[i]
    )


def bin_index(code: BinningCode, x) -> np.ndarray:
    """Bin index of x, zero-padded to the block grid.

    A blake2b hash of x keyed by (seed, message index) seeds the generator
    that draws the h symbols, so equal x give equal indices everywhere.
    """
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (code.l,):
        raise DimensionMismatch(f"Message of length {x.size} does not match l={code.l}")
    out = np.zeros(code.padded_length, dtype=np.int64)
    if code.h == 0:
        return out
    digest = hashlib.blake2b(x.tobytes(), key=code._key(), digest_size=32).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    out[: code.h] = rng.integers(0, code.spec.q, size=code.h, dtype=np.int64)
    return out


def blocks_of(code: BinningCode, x) -> np.ndarray:
    """Bin index of x as a (block_count, symbols_per_block) array."""
    return bin_index(code, x).reshape(code.block_count, code.symbols_per_block)


# ---------------------------------------------------------------------------
# Block layout
# ---------------------------------------------------------------------------


class BlockLayout:
    """Header positions of every message's blocks.

    Message i owns header columns offsets[i] .. offsets[i] + block_count_i - 1.
    """

    def __init__(self, codes: Sequence[BinningCode]):
        self.codes = tuple(codes)
        if not self.codes:
            raise ValueError("A layout needs at least one message")
        self.spec = self.codes[0].spec
        self.symbols_per_block = self.codes[0].symbols_per_block
        offsets, total = [], 0
        for code in self.codes:
            offsets.append(total)
            total += code.block_count
        self.offsets = tuple(offsets)
        self.dim = total

    def columns(self, i: int) -> range:
        return range(self.offsets[i], self.offsets[i] + self.codes[i].block_count)

    def true_blocks(self, x_vectors) -> np.ndarray:
        """All block contents stacked in header order, shape (dim, symbols_per_block)."""
        parts = [blocks_of(code, x) for code, x in zip(self.codes, x_vectors)]
        if not parts:
            return np.zeros((0, self.symbols_per_block), dtype=np.int64)
        return np.vstack(parts)

    def __repr__(self) -> str:
        counts = [c.block_count for c in self.codes]
        return f"BlockLayout(blocks={counts}, dim={self.dim}, spb={self.symbols_per_block})"


def block_layout(
    source: JointSource,
    l: int,  # noqa: E741
    spec: FieldSpec,
    s: float,
    delta: float,
    seed: int,
) -> BlockLayout:
    return BlockLayout(
        [binning_code(source, i, l, spec, s, delta, seed) for i in range(source.k)]
    )


# ---------------------------------------------------------------------------
# Packets and node state
# ---------------------------------------------------------------------------


class Packet(NamedTuple):
    coeffs: np.ndarray  # header, one coefficient per block
    payload: np.ndarray  # symbols_per_block symbols


class NodeState:
    """What a node has received.

    Attributes:
        v: Node id
        layout: Block layout of the generation
        space: Span of the stored headers
        coeffs: Stored headers, one per innovative equation (rank x dim)
        payloads: Matching payloads (rank x symbols_per_block)
        y: Side-information vector (may be None)
    """

    def __init__(self, v: int, layout: BlockLayout, y: Optional[np.ndarray] = None):
        self.v = v
        self.layout = layout
        self.spec = layout.spec
        self.space = RowSpace(layout.spec, layout.dim)
        self.coeffs = np.zeros((0, layout.dim), dtype=np.int64)
        self.payloads = np.zeros((0, layout.symbols_per_block), dtype=np.int64)
        self.y = y

    @property
    def rank(self) -> int:
        return self.space.rank

    def add_source(self, i: int, blocks: np.ndarray) -> None:
        """Store message i's own blocks as unit equations."""
        for j, col in enumerate(self.layout.columns(i)):
            unit = np.zeros(self.layout.dim, dtype=np.int64)
            unit[col] = 1
            receive(self, Packet(unit, np.asarray(blocks[j], dtype=np.int64)))

    def __repr__(self) -> str:
        return f"NodeState(v={self.v}, rank={self.rank}/{self.layout.dim})"


def zero_packet(layout: BlockLayout) -> Packet:
    return Packet(
        np.zeros(layout.dim, dtype=np.int64),
        np.zeros(layout.symbols_per_block, dtype=np.int64),
    )


def make_packet(state: NodeState, rng: np.random.Generator) -> Packet:
    """Uniformly random combination of everything the node stores.

    The stored headers are independent, so the header is uniform over the
    node's span. A node with nothing stored emits the zero packet.
    """
    if state.rank == 0:
        return zero_packet(state.layout)
    weights = state.spec.random(rng, size=state.rank)
    return Packet(
        field.combine(state.spec, weights, state.coeffs),
        field.combine(state.spec, weights, state.payloads),
    )


def receive(state: NodeState, pkt: Packet) -> bool:
    """Insert a packet's header; keep the equation iff it is innovative.

    Returns:
        True iff the node's rank grew

    Raises:
        DimensionMismatch: If the header or payload length is wrong
    """
    coeffs = np.asarray(pkt.coeffs, dtype=np.int64)
    payload = np.asarray(pkt.payload, dtype=np.int64)
    if payload.shape != (state.layout.symbols_per_block,):
        raise DimensionMismatch(
            f"Payload of {payload.size} symbols does not match the block size "
            f"{state.layout.symbols_per_block}"
        )
    if not state.space.insert(coeffs):
        return False
    state.coeffs = np.vstack([state.coeffs, coeffs[None, :]])
    state.payloads = np.vstack([state.payloads, payload[None, :]])
    return True


def can_decode_rank(
    state: NodeState, threshold: int, columns: Optional[Sequence[int]] = None
) -> bool:
    """Rank-threshold decode predicate.

    Args:
        state: Node state
        threshold: Required rank
        columns: Count only the part of the span inside these header columns
            (per-message decoding); None uses the whole header
    """
    if threshold <= 0:
        return True
    if columns is None:
        return state.rank >= threshold
    return intersection_dim_with_columns(state.space, columns) >= threshold


def can_decode_joint(state: NodeState, requirements: Mapping[Tuple[int, ...], int]) -> bool:
    """Slepian-Wolf decode predicate over message subsets.

    True iff for every (S, r) in requirements the stored headers, restricted
    to the block columns of the messages in S, have rank at least r.

    Args:
        state: Node state
        requirements: Message subset -> rank, as from sources.subset_thresholds
    """
    layout = state.layout
    k = len(layout.codes)
    for subset, need in requirements.items():
        if need <= 0:
            continue
        if len(subset) == k:
            have = state.rank
        else:
            cols = [c for i in subset for c in layout.columns(i)]
            have = projection_rank(state.space, cols)
        if have < need:
            return False
    return True


def check_packet(pkt: Packet, true_blocks: np.ndarray, spec: FieldSpec) -> bool:
    """True iff payload = header . true_blocks."""
    expected = field.combine(spec, pkt.coeffs, true_blocks)
    return bool(np.array_equal(expected, np.asarray(pkt.payload, dtype=np.int64)))


# ---------------------------------------------------------------------------
# Exhaustive MAP oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _candidate_blocks(code: BinningCode) -> Tuple[np.ndarray, np.ndarray]:
    """Every candidate sequence and its blocks: (A^l, l) and (A^l, blocks, spb)."""
    candidates = np.array(
        list(itertools.product(range(code.alphabet), repeat=code.l)), dtype=np.int64
    ).reshape(-1, code.l)
    blocks = np.array([blocks_of(code, x) for x in candidates], dtype=np.int64)
    return candidates, blocks.reshape(len(candidates), code.block_count, code.symbols_per_block)


def oracle_decode(
    code: BinningCode,
    equations: Sequence[Tuple[np.ndarray, np.ndarray]],
    y,
    source: JointSource,
    v: Optional[int],
) -> Optional[np.ndarray]:
    """MAP decoding of message code.index by exhaustive search.

    Args:
        code: Binning code of the message
        equations: (coeffs over the message's blocks, payload) pairs
        y: Side vector of node v (ignored when v is None)
        source: Joint source
        v: Decoding node, None for no side information

    Returns:
        The unique most likely sequence consistent with every equation, or
        None when no sequence or more than one sequence attains the maximum

    Raises:
        TooLarge: If alphabet^l exceeds 2^20
    """
    if code.alphabet**code.l > ORACLE_GUARD:
        raise TooLarge(f"{code.alphabet}^{code.l} candidates exceed the oracle guard of 2^20")
    spec = code.spec
    candidates, blocks = _candidate_blocks(code)

    consistent = np.ones(len(candidates), dtype=bool)
    for coeffs, payload in equations:
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.shape != (code.block_count,):
            raise DimensionMismatch(
                f"Equation of length {coeffs.size} does not match {code.block_count} blocks"
            )
        combined = field.vsum(spec, field.vmul(spec, coeffs[None, :, None], blocks), axis=1)
        consistent &= np.all(combined == np.asarray(payload)[None, :], axis=1)
    if not consistent.any():
        return None

    table = source.joint_with(v)
    drop = tuple(j for j in range(source.k) if j != code.index)
    pair = table.sum(axis=drop) if drop else table  # (|X_i|, |Y_v|)
    with np.errstate(divide="ignore"):
        log_pair = np.log(pair)
    y_col = np.zeros(code.l, dtype=np.int64) if v is None else np.asarray(y, dtype=np.int64)

    kept = candidates[consistent]
    scores = log_pair[kept, y_col[None, :]].sum(axis=1)
    best = scores.max()
    if not np.isfinite(best):
        return None
    winners = np.flatnonzero(scores >= best - 1e-9)
    if len(winners) != 1:
        return None
    return kept[winners[0]].copy()


class ErrorCurvePoint(NamedTuple):
    equations: int
    errors: int
    trials: int

    @property
    def rate(self) -> float:
        return self.errors / self.trials if self.trials else 0.0


def oracle_error_curve(
    source: JointSource,
    i: int,
    v: Optional[int],
    l: int,  # noqa: E741
    spec: FieldSpec,
    s: float,
    delta: float,
    trials: int,
    stream: Stream,
    threads: int = 1,
) -> List[ErrorCurvePoint]:
    """MAP error rate against the number of independent equations received.

    Trial j samples (x, y) and a random sequence of independent equations on
    message i's blocks, then decodes from the first r equations for every r
    up to the block count. Ambiguous decodes count as errors.
    """
    code = binning_code(source, i, l, spec, s, delta, seed=stream.seed)

    def one(j: int) -> List[bool]:
        trial = stream.child(j)
        batch = sources.sample_iid(source, l, trial.child(1).generator())
        x, y = batch.x[i], (batch.y[v] if v is not None else None)
        truth = blocks_of(code, x)
        rng = trial.child(2).generator()
        space = RowSpace(spec, code.block_count)
        equations = []
        while len(equations) < code.block_count:
            coeffs = spec.random(rng, size=code.block_count)
            if space.insert(coeffs):
                equations.append((coeffs, field.combine(spec, coeffs, truth)))
        outcome = []
        for r in range(code.block_count + 1):
            decoded = oracle_decode(code, equations[:r], y, source, v)
            outcome.append(decoded is None or not np.array_equal(decoded, x))
        return outcome

    results = np.array(map_trials(one, trials, threads), dtype=bool).reshape(
        trials, code.block_count + 1
    )
    return [
        ErrorCurvePoint(equations=r, errors=int(results[:, r].sum()), trials=trials)
        for r in range(code.block_count + 1)
    ]
