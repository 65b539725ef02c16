"""Row spaces over GF(q) and the knowledge predicate.

A node's received coefficient vectors span a subspace S_v of GF(q)^D. We keep
S_v as a reduced row-echelon basis (pivot entries 1, zero elsewhere in pivot
columns), updated with a single elimination pass per inserted vector.

Vectors are 1-D numpy int64 arrays of field elements.
"""

import itertools
from typing import Iterator, List, NamedTuple, Optional, Sequence

import numpy as np

from . import field
from .errors import DimensionMismatch, TooLarge
from .field import FieldSpec

FVector = np.ndarray

# q^(h * ambient) bound on subspace enumeration
ENUMERATION_GUARD = 2**24


class RowSpace:
    """Incrementally maintained row space in reduced row-echelon form.

    Attributes:
        spec: Field the vectors live over
        dim_ambient: Length of member vectors
        basis: (rank x dim_ambient) RREF basis
        pivots: Pivot column of each basis row, strictly increasing
    """

    def __init__(self, spec: FieldSpec, dim_ambient: int):
        self.spec = spec
        self.dim_ambient = dim_ambient
        self.basis = np.zeros((0, dim_ambient), dtype=np.int64)
        self.pivots: List[int] = []

    @classmethod
    def from_rows(cls, spec: FieldSpec, dim_ambient: int, rows) -> "RowSpace":
        space = cls(spec, dim_ambient)
        for row in rows:
            space.insert(row)
        return space

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def copy(self) -> "RowSpace":
        clone = RowSpace(self.spec, self.dim_ambient)
        clone.basis = self.basis.copy()
        clone.pivots = list(self.pivots)
        return clone

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64)
        if v.shape != (self.dim_ambient,):
            raise DimensionMismatch(
                f"Vector of length {v.shape[0] if v.ndim else 0} does not match "
                f"ambient dimension {self.dim_ambient}"
            )
        return v

    def residual(self, v) -> np.ndarray:
        """v minus its component along the basis; zero iff v is in the space."""
        v = self._check(v)
        if not self.pivots:
            return v.copy()
        coeffs = v[self.pivots]
        return field.vsub(self.spec, v, field.combine(self.spec, coeffs, self.basis))

    def contains(self, v) -> bool:
        return not np.any(self.residual(v))

    def insert(self, v) -> bool:
        """Add v to the spanning set.

        Returns:
            True iff the rank grew (v was not already in the space). The zero
            vector is a no-op.

        Raises:
            DimensionMismatch: If v has the wrong length
        """
        r = self.residual(v)
        nonzero = np.flatnonzero(r)
        if nonzero.size == 0:
            return False

        spec = self.spec
        pc = int(nonzero[0])
        r = field.vmul(spec, r, field.inv(spec, int(r[pc])))
        if self.pivots:
            col = self.basis[:, pc]
            self.basis = field.vsub(spec, self.basis, field.vmul(spec, col[:, None], r[None, :]))

        pos = int(np.searchsorted(self.pivots, pc))
        self.basis = np.insert(self.basis, pos, r, axis=0)
        self.pivots.insert(pos, pc)
        return True

    def knows(self, mu) -> bool:
        return knows(self, mu)

    def __repr__(self) -> str:
        return f"RowSpace({self.spec}, dim={self.dim_ambient}, rank={self.rank})"


def knows(space: RowSpace, mu) -> bool:
    """True iff some c in the space has <c, mu> != 0.

    Raises:
        DimensionMismatch: If mu has the wrong length
    """
    mu = space._check(mu)
    if space.rank == 0:
        return False
    return bool(np.any(field.matvec(space.spec, space.basis, mu)))


def orthogonal_complement(space: RowSpace) -> RowSpace:
    """space^perp under the bilinear form <a, b> = sum a_i b_i.

    One vector per free column f: 1 at f, minus the basis column f at the
    pivot positions.
    """
    n = space.dim_ambient
    free = [j for j in range(n) if j not in set(space.pivots)]
    rows = np.zeros((len(free), n), dtype=np.int64)
    if free:
        rows[np.arange(len(free)), free] = 1
        if space.pivots:
            rows[:, space.pivots] = field.vneg(space.spec, space.basis[:, free].T)
    return RowSpace.from_rows(space.spec, n, rows)


def projection_rank(space: RowSpace, columns: Sequence[int]) -> int:
    """Rank of S restricted to the given columns (basis[:, columns])."""
    cols = sorted(set(columns))
    if len(cols) == space.dim_ambient:
        return space.rank
    if not cols or space.rank == 0:
        return 0
    return RowSpace.from_rows(space.spec, len(cols), space.basis[:, cols]).rank


def intersection_dim_with_columns(space: RowSpace, columns: Sequence[int]) -> int:
    """dim(S ∩ span{e_j : j in columns}).

    Equals rank(S) minus the rank of S projected onto the remaining columns.
    """
    keep = set(columns)
    others = [j for j in range(space.dim_ambient) if j not in keep]
    return space.rank - projection_rank(space, others)


# ---------------------------------------------------------------------------
# Exhaustive subspace enumeration and the q^h + 1 witness check
# ---------------------------------------------------------------------------


def enumerate_subspaces(spec: FieldSpec, n: int, max_dim: int) -> Iterator[np.ndarray]:
    """Yield the RREF basis of every subspace of GF(q)^n with dimension <= max_dim.

    Each subspace appears exactly once (RREF bases are canonical).
    """
    q = spec.q
    for r in range(0, max_dim + 1):
        for pivots in itertools.combinations(range(n), r):
            pivot_set = set(pivots)
            free = [
                (i, j)
                for i, pc in enumerate(pivots)
                for j in range(pc + 1, n)
                if j not in pivot_set
            ]
            for values in itertools.product(range(q), repeat=len(free)):
                basis = np.zeros((r, n), dtype=np.int64)
                for i, pc in enumerate(pivots):
                    basis[i, pc] = 1
                for (i, j), value in zip(free, values):
                    basis[i, j] = value
                yield basis


def witness_set(spec: FieldSpec, ambient_dim: int, h: int, strict: bool = False) -> np.ndarray:
    """All q^h vectors of span{e_0..e_(h-1)} plus e_h.

    With strict=True the zero vector is left out.
    """
    vectors = []
    for values in itertools.product(range(spec.q), repeat=h):
        if strict and not any(values):
            continue
        v = np.zeros(ambient_dim, dtype=np.int64)
        v[:h] = values
        vectors.append(v)
    extra = np.zeros(ambient_dim, dtype=np.int64)
    extra[h] = 1
    vectors.append(extra)
    return np.array(vectors, dtype=np.int64)


class WitnessCheck(NamedTuple):
    witnesses: np.ndarray
    verified: bool
    subspaces_checked: int
    counterexample: Optional[np.ndarray]


def verify_lemma4(
    spec: FieldSpec, ambient_dim: int, h: int, strict: bool = False
) -> WitnessCheck:
    """Check that every subspace K with dim K <= h has a witness in K^perp.

    Args:
        spec: Field
        ambient_dim: Dimension of the ambient space
        h: Dimension bound, 0 <= h < ambient_dim
        strict: Drop the zero vector from the witness set

    Returns:
        WitnessCheck with the witness set, the verdict, the number of
        subspaces enumerated and the first failing subspace basis (if any)

    Raises:
        ValueError: If h is out of range
        TooLarge: If q^(h * ambient_dim) exceeds the enumeration guard
    """
    if not 0 <= h < ambient_dim:
        raise ValueError(f"h must satisfy 0 <= h < {ambient_dim}, got {h}")
    if spec.q ** (h * ambient_dim) > ENUMERATION_GUARD:
        raise TooLarge(
            f"{spec}^({h}*{ambient_dim}) subspace candidates exceed the guard of 2^24"
        )

    witnesses = witness_set(spec, ambient_dim, h, strict=strict)
    checked = 0
    for basis in enumerate_subspaces(spec, ambient_dim, h):
        checked += 1
        if basis.shape[0] == 0:
            continue
        # inner products of every basis row with every witness: (rank, w)
        products = field.vsum(
            spec, field.vmul(spec, basis[:, None, :], witnesses[None, :, :]), axis=2
        )
        if not np.any(np.all(products == 0, axis=0)):
            return WitnessCheck(witnesses, False, checked, basis)
    return WitnessCheck(witnesses, True, checked, None)
