"""The first Grigorchuk group as a concrete infinite torsion group, and the
weighted left-regular cocycle built on it.

Elements are words over ``abcd``; a word is read left to right as the order in
which letters act on the binary tree.  The wreath recursion is

    a = (e, e) swap,   b = (a, c),   c = (a, d),   d = (e, b).

In the Hilbert space with orthogonal basis G and ``|g| = 2**|g|_S``, left
multiplication by g has operator norm ``2**|g|_S``.  Norms are reported in
log2 units, i.e. as word lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

__all__ = [
    "GENERATORS",
    "GrigorchukElement",
    "BallTable",
    "RadiusExceeded",
    "OrderCapExceeded",
    "reduce",
    "sections",
    "is_trivial",
    "act_on_sequence",
    "word_length",
    "geodesic_length",
    "operator_norm",
    "truncated_norm",
    "element_order",
    "power_lengths",
    "periodic_banach_exponent",
    "geodesic_ray_exponent",
]

GENERATORS = "abcd"

_SECTIONS = {"b": ("a", "c"), "c": ("a", "d"), "d": ("", "b")}
_BCD_PRODUCT = {
    ("b", "c"): "d", ("c", "b"): "d",
    ("b", "d"): "c", ("d", "b"): "c",
    ("c", "d"): "b", ("d", "c"): "b",
}


class RadiusExceeded(LookupError):
    """The element is not inside the enumerated ball; grow the table."""


class OrderCapExceeded(RuntimeError):
    pass


def reduce(word: str) -> str:
    """Normal form: a-letters alternate with single letters from {b, c, d}."""
    out: list[str] = []
    for x in word:
        if x not in GENERATORS:
            raise ValueError(f"unknown generator {x!r}")
        if not out:
            out.append(x)
            continue
        y = out[-1]
        if x == y:
            out.pop()
        elif x != "a" and y != "a":
            out[-1] = _BCD_PRODUCT[(y, x)]
        else:
            out.append(x)
    return "".join(out)


@lru_cache(maxsize=None)
def sections(word: str) -> tuple[str, str, bool]:
    """First-level sections (left, right) and root swap of a word."""
    left: list[str] = []
    right: list[str] = []
    swap = False
    for x in word:
        if x == "a":
            swap = not swap
            continue
        s0, s1 = _SECTIONS[x]
        # the letter acts after the swaps so far have permuted the subtrees
        if swap:
            s0, s1 = s1, s0
        left.append(s0)
        right.append(s1)
    return reduce("".join(left)), reduce("".join(right)), swap


@lru_cache(maxsize=None)
def _trivial_reduced(word: str, depth: int) -> bool:
    if not word:
        return True
    if len(word) == 1:
        return False
    if word.count("a") % 2:
        return False
    if depth > 200:
        raise RecursionError("wreath recursion failed to contract")
    left, right, swap = sections(word)
    if swap:
        return False
    return _trivial_reduced(left, depth + 1) and _trivial_reduced(right, depth + 1)


def is_trivial(word: str) -> bool:
    """Word problem by wreath recursion; terminates because sections contract."""
    return _trivial_reduced(reduce(word), 0)


def act_on_sequence(word: str, seq: tuple[int, ...]) -> tuple[int, ...]:
    """Act on a finite 0/1 sequence letter by letter, straight from the recursion."""
    for x in word:
        seq = _act_letter(x, seq)
    return seq


def _act_letter(x: str, seq: tuple[int, ...]) -> tuple[int, ...]:
    if not seq or x == "":
        return seq
    head, tail = seq[0], seq[1:]
    if x == "a":
        return (1 - head,) + tail
    sub = _SECTIONS[x][head]
    return (head,) + (_act_letter(sub, tail) if sub else tail)


def _level_perms(depth: int) -> dict[str, np.ndarray]:
    """Permutations of the 2**depth level vertices (big-endian bit order)."""
    n = 1 << depth
    perms = {}
    for x in GENERATORS:
        perm = np.empty(n, dtype=np.int32)
        for k in range(n):
            bits = tuple((k >> (depth - 1 - i)) & 1 for i in range(depth))
            img = _act_letter(x, bits)
            perm[k] = sum(b << (depth - 1 - i) for i, b in enumerate(img))
        perms[x] = perm
    return perms


@dataclass(frozen=True)
class GrigorchukElement:
    word: str

    def __post_init__(self):
        object.__setattr__(self, "word", reduce(self.word))

    def __mul__(self, other: "GrigorchukElement") -> "GrigorchukElement":
        return GrigorchukElement(self.word + other.word)

    def __pow__(self, k: int) -> "GrigorchukElement":
        base = self.word if k >= 0 else self.word[::-1]
        return GrigorchukElement(base * abs(k))

    def inverse(self) -> "GrigorchukElement":
        # all generators are involutions
        return GrigorchukElement(self.word[::-1])

    def is_trivial(self) -> bool:
        return is_trivial(self.word)

    def equals(self, other: "GrigorchukElement") -> bool:
        return is_trivial(self.word + other.word[::-1])

    def sections(self):
        left, right, swap = sections(self.word)
        return GrigorchukElement(left), GrigorchukElement(right), swap


def _as_word(g) -> str:
    return g.word if isinstance(g, GrigorchukElement) else reduce(g)


@dataclass
class BallTable:
    """Breadth-first enumeration of the Cayley ball over S = {a, b, c, d}.

    Candidates are bucketed by their action on tree level ``depth`` and
    confirmed equal by the word problem, so representatives are pairwise
    distinct elements and their lengths are geodesic.
    """

    radius: int = 0
    depth: int = 10
    words: list[str] = field(default_factory=list)
    lengths: list[int] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)

    def __post_init__(self):
        self._perms = _level_perms(self.depth)
        self._buckets: dict[bytes, list[int]] = {}
        self._perm_of: list[np.ndarray] = []
        target, self.radius = self.radius, -1
        self._add("", np.arange(1 << self.depth, dtype=np.int32), 0)
        self.radius = 0
        self.sizes = [1]
        self.grow(target)

    def _add(self, word: str, perm: np.ndarray, length: int) -> None:
        self._buckets.setdefault(perm.tobytes(), []).append(len(self.words))
        self.words.append(word)
        self.lengths.append(length)
        self._perm_of.append(perm)

    def _find(self, word: str, perm: np.ndarray) -> int | None:
        for k in self._buckets.get(perm.tobytes(), ()):
            if is_trivial(word + self.words[k][::-1]):
                return k
        return None

    def _perm(self, word: str) -> np.ndarray:
        perm = np.arange(1 << self.depth, dtype=np.int32)
        for x in word:
            perm = self._perms[x][perm]
        return perm

    def grow(self, radius: int) -> "BallTable":
        while self.radius < radius:
            r = self.radius + 1
            frontier = [k for k, n in enumerate(self.lengths) if n == r - 1]
            for k in frontier:
                for x in GENERATORS:
                    cand = reduce(self.words[k] + x)
                    if len(cand) < r:
                        continue
                    perm = self._perms[x][self._perm_of[k]]
                    if self._find(cand, perm) is None:
                        self._add(cand, perm, r)
            self.radius = r
            self.sizes.append(len(self.words))
            if self.sizes[-1] == self.sizes[-2]:
                raise RuntimeError(f"sphere of radius {r} is empty; the group would be finite")
        return self

    def lookup(self, g) -> int:
        word = _as_word(g)
        k = self._find(word, self._perm(word))
        if k is None:
            raise RadiusExceeded(f"{word!r} lies outside the ball of radius {self.radius}")
        return k

    def sphere(self, r: int) -> list[str]:
        return [w for w, n in zip(self.words, self.lengths) if n == r]

    def ball(self, r: int) -> list[str]:
        return [w for w, n in zip(self.words, self.lengths) if n <= r]


def word_length(g, table: BallTable) -> int:
    """Geodesic length |g|_S."""
    return table.lengths[table.lookup(g)]


def geodesic_length(g, table: BallTable, max_radius: int = 20) -> int:
    """|g|_S for elements up to twice the table radius.

    If |g| = d > R, every geodesic passes through the sphere S(d - R), so the
    first m with some h in S(m) and h^-1 g in B(R) gives d = m + |h^-1 g|.
    The table grows (up to ``max_radius``) when no such m <= R exists.
    """
    word = _as_word(g)
    while True:
        try:
            return word_length(word, table)
        except RadiusExceeded:
            pass
        for m in range(1, table.radius + 1):
            hits = []
            for h in table.sphere(m):
                try:
                    hits.append(m + word_length(h[::-1] + word, table))
                except RadiusExceeded:
                    continue
            if hits:
                return min(hits)
        if table.radius >= max_radius:
            raise RadiusExceeded(f"|{word}| exceeds {2 * table.radius}")
        table.grow(table.radius + 1)


def operator_norm(g, table: BallTable) -> tuple[float, int]:
    """(2**|g|_S, |g|_S) for left multiplication on the weighted l2 space."""
    n = word_length(g, table)
    return float(2.0 ** n), n


def truncated_norm(g, table: BallTable, radius: int) -> int:
    """log2 of max over basis vectors h with |h| <= radius of |g h| / |h|.

    Left multiplication sends the orthogonal basis to itself, so on the span of
    the ball this maximum is the operator norm of the restriction.
    """
    word = _as_word(g)
    if radius + len(word) > table.radius:
        raise RadiusExceeded("table too small for the truncation")
    return max(word_length(word + h, table) - n for h, n in zip(table.words, table.lengths) if n <= radius)


def element_order(g, cap: int = 256) -> int:
    """Order of g by repeated squaring; orders in this group are powers of 2."""
    if cap < 1 or cap & (cap - 1):
        raise ValueError("cap must be a power of 2")
    word = _as_word(g)
    k = 1
    while not is_trivial(word):
        k *= 2
        if k > cap:
            raise OrderCapExceeded(f"order of {word!r} exceeds {cap}")
        word = reduce(word + word)
    if k > 1 and not _order_is_exact(_as_word(g), k):
        raise ArithmeticError("order is not a power of 2")
    return k


def _order_is_exact(word: str, k: int) -> bool:
    # g^(k/2) != e confirms the order is exactly k among powers of two
    return not is_trivial(word * (k // 2))


def power_lengths(g, table: BallTable, order: int | None = None) -> list[int]:
    """|g^k|_S for k = 0..order-1 (g^k and g^-k share a length)."""
    word = _as_word(g)
    order = order or element_order(word)
    out = []
    for k in range(order):
        if k > order // 2:
            out.append(out[order - k])
        else:
            out.append(geodesic_length(word * k, table))
    return out


def periodic_banach_exponent(g, n_max: int, table: BallTable) -> tuple[float, np.ndarray]:
    """Max over n in [n_max/2, n_max] of (1/n)|g^n|_S ln 2, and the full sequence.

    g^n cycles through order(g) classes, so the sequence tends to 0.
    """
    lengths = power_lengths(g, table)
    order = len(lengths)
    ns = np.arange(1, n_max + 1)
    values = np.array([lengths[n % order] for n in ns]) * math.log(2) / ns
    window = ns >= n_max / 2
    return float(values[window].max()), values


def geodesic_ray_exponent(table: BallTable, n: int) -> tuple[float, str]:
    """ln 2 and the lexicographically first geodesic word of length n.

    Every BFS representative extends its parent by one letter, so all its
    prefixes are geodesic; along it the cocycle norm is exactly 2**k at step k.
    """
    if table.radius < n:
        table.grow(n)
    sphere = sorted(table.sphere(n))
    if not sphere:
        raise RuntimeError(f"no element of length {n}; the group would be finite")
    witness = sphere[0]
    for k in range(1, n + 1):
        if word_length(witness[:k], table) != k:
            raise RuntimeError(f"prefix {witness[:k]!r} of the witness is not geodesic")
    return math.log(2), witness
