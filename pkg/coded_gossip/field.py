"""Exact arithmetic in finite fields GF(q), q = p^m <= 2^16.

Elements are plain integers in [0, q): the base-p digits of the integer are
the coefficients of the element's polynomial representative, lowest degree
first. Multiplication, inversion and division go through log/antilog tables
built once per field; addition is XOR for p = 2, mod-p for m = 1 and
digit-wise otherwise.

Scalar functions take and return ``int``. The ``v*`` functions take numpy
integer arrays and broadcast like numpy arithmetic.
"""

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import FieldSpecError, ZeroInverse

FieldElement = int

MAX_ORDER = 2**16
MAX_DEGREE = 16


# ---------------------------------------------------------------------------
# Polynomials over F_p (coefficient lists, lowest degree first)
# ---------------------------------------------------------------------------


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prime_factors(n: int) -> List[int]:
    factors = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            factors.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        factors.append(n)
    return factors


def _poly_rem(num: List[int], den: List[int], p: int) -> List[int]:
    """Remainder of num / den over F_p; den must be monic."""
    rem = list(num)
    d = len(den) - 1
    for i in range(len(rem) - 1, d - 1, -1):
        c = rem[i] % p
        if c:
            for j in range(d + 1):
                rem[i - d + j] = (rem[i - d + j] - c * den[j]) % p
    return [c % p for c in rem[:d]]


def _monic_polys(p: int, degree: int):
    """Yield every monic polynomial of the given degree, lexicographic in (c0, c1, ...)."""
    for low in range(p**degree):
        coeffs = []
        for _ in range(degree):
            coeffs.append(low % p)
            low //= p
        yield coeffs + [1]


def is_irreducible(p: int, modulus: Tuple[int, ...]) -> bool:
    """Check irreducibility over F_p by trial division.

    Divisors up to half the degree are enough: a reducible polynomial always
    has a factor of at most that degree.
    """
    m = len(modulus) - 1
    if m < 1:
        return False
    if m == 1:
        return True
    if modulus[0] % p == 0:
        return False
    for degree in range(1, m // 2 + 1):
        for divisor in _monic_polys(p, degree):
            if not any(_poly_rem(list(modulus), divisor, p)):
                return False
    return True


def find_irreducible(p: int, m: int) -> Tuple[int, ...]:
    """Return the first monic irreducible polynomial of degree m in lexicographic order."""
    for candidate in _monic_polys(p, m):
        if candidate[0] != 0 and is_irreducible(p, tuple(candidate)):
            return tuple(candidate)
    raise FieldSpecError(f"No irreducible polynomial of degree {m} over F_{p}")  # unreachable


# ---------------------------------------------------------------------------
# Built-in moduli table
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def load_builtin_moduli() -> Dict[Tuple[int, int], Tuple[int, ...]]:
    """Load the bundled modulus table from the package data directory.

    Returns an empty mapping if the file cannot be read (moduli are then
    found by search).
    """
    table = {}
    try:
        data_path = Path(__file__).parent / "data" / "moduli.txt"
        with open(data_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                values = [int(tok) for tok in line.split()]
                p, m, coeffs = values[0], values[1], tuple(values[2:])
                table[(p, m)] = coeffs
    except (FileNotFoundError, IOError):
        return {}
    return table


def default_modulus(p: int, m: int) -> Tuple[int, ...]:
    """Canonical modulus for GF(p^m): table entry if present, otherwise search."""
    if m == 1:
        return (0, 1)
    return load_builtin_moduli().get((p, m)) or find_irreducible(p, m)


# ---------------------------------------------------------------------------
# FieldSpec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """GF(p^m) with a fixed irreducible modulus.

    Attributes:
        p: Prime characteristic
        m: Extension degree (>= 1)
        modulus: Monic irreducible polynomial of degree m over F_p, lowest
            degree first. Resolved from the built-in table when omitted;
            ignored for m = 1.
    """

    p: int
    m: int = 1
    modulus: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not _is_prime(self.p):
            raise FieldSpecError(f"Characteristic must be prime, got p={self.p}")
        if not 1 <= self.m <= MAX_DEGREE:
            raise FieldSpecError(f"Extension degree must be in [1, {MAX_DEGREE}], got m={self.m}")
        if self.p**self.m > MAX_ORDER:
            raise FieldSpecError(f"Field order {self.p}^{self.m} exceeds 2^16")

        if self.modulus is None or self.m == 1:
            object.__setattr__(self, "modulus", default_modulus(self.p, self.m))
        else:
            modulus = tuple(int(c) % self.p for c in self.modulus)
            if len(modulus) != self.m + 1 or modulus[-1] != 1:
                raise FieldSpecError(
                    f"Modulus must be monic of degree {self.m} "
                    f"(got {len(modulus)} coefficients, leading {modulus[-1]})"
                )
            if not is_irreducible(self.p, modulus):
                raise FieldSpecError(f"Modulus {list(modulus)} is reducible over F_{self.p}")
            object.__setattr__(self, "modulus", modulus)

    @property
    def q(self) -> int:
        return self.p**self.m

    @property
    def bits(self) -> float:
        """log2 q."""
        return float(np.log2(self.q))

    def random(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Uniform elements (zero included)."""
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    def element(self, value: int) -> FieldElement:
        """Validate and return a field element."""
        value = int(value)
        if not 0 <= value < self.q:
            raise ValueError(f"{value} is not an element of GF({self.q})")
        return value

    def __str__(self) -> str:
        return f"GF({self.q})" if self.m == 1 else f"GF({self.p}^{self.m})"


def field_from_order(q: int, modulus: Optional[Tuple[int, ...]] = None) -> FieldSpec:
    """Build the field of order q (a prime power)."""
    if q < 2:
        raise FieldSpecError(f"Field order must be a prime power >= 2, got {q}")
    p = _prime_factors(q)[0]
    m, rest = 0, q
    while rest % p == 0:
        rest //= p
        m += 1
    if rest != 1:
        raise FieldSpecError(f"Field order must be a prime power, got {q}")
    return FieldSpec(p=p, m=m, modulus=modulus)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


class _Tables(NamedTuple):
    exp: np.ndarray  # length 2(q-1): exp[i] = g^i, doubled to skip a modulo
    log: np.ndarray  # log[a] for a != 0; log[0] is unused
    neg: np.ndarray  # additive inverses
    powers: np.ndarray  # p^i for i < m


def _mul_poly_int(spec: FieldSpec, a: int, b: int) -> int:
    """Table-free product, used only while building the tables."""
    p, m = spec.p, spec.m
    if m == 1:
        return (a * b) % p
    da = [(a // p**i) % p for i in range(m)]
    db = [(b // p**i) % p for i in range(m)]
    prod = [0] * (2 * m - 1)
    for i, x in enumerate(da):
        if x:
            for j, y in enumerate(db):
                prod[i + j] += x * y
    rem = _poly_rem(prod, list(spec.modulus), p) if len(prod) > m else prod
    return sum((c % p) * p**i for i, c in enumerate(rem))


def _times_x(spec: FieldSpec, v: int) -> int:
    """v * x mod modulus: a digit shift plus one reduction step."""
    q, p = spec.q, spec.p
    if p == 2:
        v <<= 1
        if v & q:
            v ^= sum(c << i for i, c in enumerate(spec.modulus))
        return v
    shifted = v * p
    lead, low = divmod(shifted, q)
    if lead == 0:
        return low
    out = 0
    for i in range(spec.m):
        digit = (low // p**i) % p
        out += ((digit - lead * spec.modulus[i]) % p) * p**i
    return out


def _cycle(spec: FieldSpec, g: int) -> Optional[List[int]]:
    """Powers g^0..g^(q-2) if g generates the multiplicative group, else None."""
    q = spec.q
    if spec.m > 1 and g == spec.p:
        step = lambda x: _times_x(spec, x)  # noqa: E731
    else:
        step = lambda x: _mul_poly_int(spec, x, g)  # noqa: E731
    seq = [1]
    x = g
    while x != 1:
        seq.append(x)
        if len(seq) > q - 1:
            return None
        x = step(x)
    return seq if len(seq) == q - 1 else None


@lru_cache(maxsize=None)
def tables(spec: FieldSpec) -> _Tables:
    """Log/antilog and negation tables for spec (built once, shared)."""
    q, p, m = spec.q, spec.p, spec.m
    # x itself is the natural first candidate for m > 1
    candidates = ([p] if m > 1 else []) + list(range(2, q)) + [1]
    seq = None
    for g in candidates:
        seq = _cycle(spec, g)
        if seq is not None:
            break

    exp = np.array(seq + seq, dtype=np.int64)
    log = np.zeros(q, dtype=np.int64)
    log[np.array(seq, dtype=np.int64)] = np.arange(q - 1, dtype=np.int64)

    powers = np.array([p**i for i in range(m)], dtype=np.int64)
    values = np.arange(q, dtype=np.int64)
    digits = (values[:, None] // powers) % p
    neg = (((p - digits) % p) * powers).sum(axis=1)
    return _Tables(exp=exp, log=log, neg=neg, powers=powers)


# ---------------------------------------------------------------------------
# Scalar arithmetic
# ---------------------------------------------------------------------------


def add(spec: FieldSpec, a: FieldElement, b: FieldElement) -> FieldElement:
    if spec.p == 2:
        return a ^ b
    if spec.m == 1:
        return (a + b) % spec.p
    return int(vadd(spec, np.int64(a), np.int64(b)))


def neg(spec: FieldSpec, a: FieldElement) -> FieldElement:
    return int(tables(spec).neg[a])


def sub(spec: FieldSpec, a: FieldElement, b: FieldElement) -> FieldElement:
    return add(spec, a, neg(spec, b))


def mul(spec: FieldSpec, a: FieldElement, b: FieldElement) -> FieldElement:
    if a == 0 or b == 0:
        return 0
    t = tables(spec)
    return int(t.exp[t.log[a] + t.log[b]])


def inv(spec: FieldSpec, a: FieldElement) -> FieldElement:
    """Multiplicative inverse.

    Raises:
        ZeroInverse: If a is zero
    """
    if a == 0:
        raise ZeroInverse(f"0 has no inverse in {spec}")
    t = tables(spec)
    return int(t.exp[(spec.q - 1) - t.log[a]])


def div(spec: FieldSpec, a: FieldElement, b: FieldElement) -> FieldElement:
    return mul(spec, a, inv(spec, b))


def power(spec: FieldSpec, a: FieldElement, e: int) -> FieldElement:
    if a == 0:
        return 1 if e == 0 else 0
    t = tables(spec)
    return int(t.exp[(int(t.log[a]) * e) % (spec.q - 1)])


# ---------------------------------------------------------------------------
# Vectorised arithmetic
# ---------------------------------------------------------------------------


def vadd(spec: FieldSpec, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if spec.p == 2:
        return np.bitwise_xor(a, b)
    if spec.m == 1:
        return (a + b) % spec.p
    p = spec.p
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    for pw in tables(spec).powers:
        out += (((a // pw) % p + (b // pw) % p) % p) * pw
    return out


def vneg(spec: FieldSpec, a) -> np.ndarray:
    return tables(spec).neg[np.asarray(a, dtype=np.int64)]


def vsub(spec: FieldSpec, a, b) -> np.ndarray:
    return vadd(spec, a, vneg(spec, b))


def vmul(spec: FieldSpec, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    t = tables(spec)
    out = t.exp[t.log[a] + t.log[b]]
    return np.where((a == 0) | (b == 0), 0, out)


def vinv(spec: FieldSpec, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if np.any(a == 0):
        raise ZeroInverse(f"0 has no inverse in {spec}")
    t = tables(spec)
    return t.exp[(spec.q - 1) - t.log[a]]


def vsum(spec: FieldSpec, a, axis=None) -> np.ndarray:
    """Field sum along an axis (all axes when axis is None)."""
    a = np.asarray(a, dtype=np.int64)
    if spec.p == 2:
        if axis is None:
            return np.bitwise_xor.reduce(a.ravel())
        return np.bitwise_xor.reduce(a, axis=axis)
    if spec.m == 1:
        return a.sum(axis=axis) % spec.p
    p = spec.p
    out = 0
    for pw in tables(spec).powers:
        out = out + (((a // pw) % p).sum(axis=axis) % p) * pw
    return np.asarray(out, dtype=np.int64)


def dot(spec: FieldSpec, a, b) -> FieldElement:
    """Bilinear form sum_i a_i b_i (no conjugation)."""
    return int(vsum(spec, vmul(spec, a, b)))


def matvec(spec: FieldSpec, matrix, vector) -> np.ndarray:
    """matrix @ vector over the field."""
    return vsum(spec, vmul(spec, matrix, np.asarray(vector)[None, :]), axis=1)


def combine(spec: FieldSpec, coeffs, rows) -> np.ndarray:
    """Linear combination sum_i coeffs[i] * rows[i] over the field."""
    rows = np.asarray(rows, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.int64)
    if rows.shape[0] == 0:
        return np.zeros(rows.shape[1:], dtype=np.int64)
    return vsum(spec, vmul(spec, coeffs.reshape((-1,) + (1,) * (rows.ndim - 1)), rows), axis=0)
