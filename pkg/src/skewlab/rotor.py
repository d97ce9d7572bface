"""Unit quaternion arithmetic for SU(2) acting on S^3 by left multiplication.

Words over a generator set are tuples of signed, 1-based indices written in
product order: ``(2, -1, 3)`` means ``a_2 a_1^{-1} a_3``, so the rightmost
letter acts first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "UnitQuaternion",
    "IdentityQuaternionError",
    "qmul",
    "left_matrix",
    "compose",
    "act",
    "eigen_angle",
    "partial_sum",
    "partial_sum_closed_form",
    "partial_sum_bound",
    "reduce_word",
    "invert_word",
    "evaluate_word",
    "random_unit_quaternion",
    "random_rotation",
    "find_short_relation",
    "no_short_relation_check",
]


class IdentityQuaternionError(ValueError):
    """Raised where a nontrivial rotation is required but the identity was given."""


def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of (..., 4) arrays, no renormalization."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    w0, x0, y0, z0 = np.moveaxis(p, -1, 0)
    w1, x1, y1, z1 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            w0 * w1 - x0 * x1 - y0 * y1 - z0 * z1,
            w0 * x1 + x0 * w1 + y0 * z1 - z0 * y1,
            w0 * y1 - x0 * z1 + y0 * w1 + z0 * x1,
            w0 * z1 + x0 * y1 - y0 * x1 + z0 * w1,
        ],
        axis=-1,
    )


def left_matrix(q: np.ndarray) -> np.ndarray:
    """4x4 matrix of ``v -> q v``."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def _conj(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float) * np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class UnitQuaternion:
    """Element of SU(2); components are renormalized on construction."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        arr = np.array([self.w, self.x, self.y, self.z], dtype=float)
        norm = np.sqrt(arr @ arr)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError(f"cannot normalize quaternion {arr}")
        if norm != 1.0:
            arr = arr / norm
        for name, val in zip("wxyz", arr):
            object.__setattr__(self, name, float(val))

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "UnitQuaternion":
        return cls(*(float(c) for c in arr))

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "UnitQuaternion":
        """``cos(angle) + sin(angle) u``; ``angle`` is the eigen-angle of left multiplication."""
        u = np.asarray(axis, dtype=float)
        u = u / np.linalg.norm(u)
        return cls(np.cos(angle), *(np.sin(angle) * u))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def inverse(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def matrix(self) -> np.ndarray:
        return left_matrix(self.as_array())

    def distance(self, other: "UnitQuaternion") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return compose(self, other)

    def __pow__(self, k: int) -> "UnitQuaternion":
        base = self if k >= 0 else self.inverse()
        out = UnitQuaternion.identity()
        for _ in range(abs(k)):
            out = compose(base, out)
        return out


def compose(p: UnitQuaternion, q: UnitQuaternion) -> UnitQuaternion:
    """Group product ``p q`` (``q`` acts first)."""
    return UnitQuaternion.from_array(qmul(p.as_array(), q.as_array()))


def act(q: UnitQuaternion, v) -> np.ndarray:
    """Left multiplication ``q v`` on R^4; ``v`` may be a (..., 4) batch."""
    return np.asarray(v, dtype=float) @ q.matrix().T


def eigen_angle(q: UnitQuaternion) -> float:
    """Angle theta in [0, pi] with eigenvalues exp(+-i theta) for ``v -> q v``."""
    return float(np.arccos(np.clip(q.w, -1.0, 1.0)))


def partial_sum(q: UnitQuaternion, v, n: int) -> np.ndarray:
    """``sum_{k<n} q^k v`` by direct iteration."""
    if n < 0:
        raise ValueError("n must be non-negative")
    m = q.matrix()
    term = np.asarray(v, dtype=float).copy()
    total = np.zeros_like(term)
    for _ in range(n):
        total += term
        term = m @ term
    return total


def partial_sum_closed_form(q: UnitQuaternion, v, n) -> np.ndarray:
    """``(1 - q^n)(1 - q)^{-1} v``; an array of n gives one row per entry.

    Raises IdentityQuaternionError for ``q = 1``; the sum is then ``n v``.
    """
    ns = np.asarray(n)
    if np.any(ns < 0):
        raise ValueError("n must be non-negative")
    one = np.array([1.0, 0.0, 0.0, 0.0])
    d = one - q.as_array()
    d2 = d @ d
    if d2 == 0.0:
        raise IdentityQuaternionError("closed form undefined for the identity; use n*v")
    # q^n through the eigen-angle avoids n-fold product drift
    theta = eigen_angle(q)
    axis = q.as_array()[1:]
    s = np.linalg.norm(axis)
    unit = axis / s if s > 0 else np.zeros(3)
    angles = ns[..., None] * theta
    qn = np.concatenate([np.cos(angles), np.sin(angles) * unit], axis=-1)
    geom = qmul(one - qn, _conj(d) / d2)
    return qmul(geom, np.asarray(v, dtype=float))


def partial_sum_bound(q: UnitQuaternion) -> float:
    """Uniform bound ``2/|q - 1|`` on ``|sum_{k<n} q^k v|`` over unit v and all n."""
    d = np.linalg.norm(q.as_array() - np.array([1.0, 0.0, 0.0, 0.0]))
    if d == 0.0:
        raise IdentityQuaternionError("partial sums of the identity are unbounded")
    return float(2.0 / d)


def reduce_word(word: Iterable[int]) -> tuple[int, ...]:
    """Free reduction of a signed-index word."""
    out: list[int] = []
    for letter in word:
        if letter == 0:
            raise ValueError("letter 0 is not a valid signed index")
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(int(letter))
    return tuple(out)


def invert_word(word: Sequence[int]) -> tuple[int, ...]:
    return tuple(-letter for letter in reversed(word))


def evaluate_word(word: Sequence[int], generators: Sequence[UnitQuaternion]) -> UnitQuaternion:
    """Product of the word's letters; the rightmost letter acts first."""
    m = len(generators)
    out = np.array([1.0, 0.0, 0.0, 0.0])
    for letter in reversed(word):
        idx = abs(letter) - 1
        if letter == 0 or idx >= m:
            raise IndexError(f"letter {letter} out of range for {m} generators")
        g = generators[idx].as_array()
        if letter < 0:
            g = _conj(g)
        out = qmul(g, out)
        out /= np.linalg.norm(out)
    return UnitQuaternion.from_array(out)


def random_unit_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    """Haar-distributed element of SU(2)."""
    return UnitQuaternion.from_array(rng.normal(size=4))


def random_rotation(rng: np.random.Generator, max_angle: float) -> UnitQuaternion:
    """Rotation with eigen-angle uniform in [0, max_angle] about a uniform axis."""
    axis = rng.normal(size=3)
    angle = max_angle * rng.random()
    return UnitQuaternion.from_axis_angle(axis, angle)


def _trace_word(levels, level: int, row: int) -> tuple[int, ...]:
    letters = []
    while level >= 0:
        _, parents, last = levels[level]
        letters.append(int(last[row]))
        row = int(parents[row])
        level -= 1
    # levels grow by left multiplication, so the newest letter is leftmost
    return tuple(letters)


# generic projection direction for sorting word values
_KEY = np.array([1.0, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(5.0)])
_KEY /= np.linalg.norm(_KEY)
_KEY2 = np.array([np.sqrt(7.0), -np.sqrt(3.0), 1.0, -np.sqrt(11.0)])
_KEY2 /= np.linalg.norm(_KEY2)


def find_short_relation(
    generators: Sequence[UnitQuaternion],
    max_len: int,
    tol: float = 1e-6,
    bands: int | None = None,
) -> tuple[int, ...] | None:
    """Return a nontrivial reduced word of length <= max_len within tol of 1, or None.

    Meet in the middle: a relation ``u v`` of length L splits into halves of
    length at most ceil(L/2), so one exists iff a nonempty half-length word is
    within tol of 1 or two distinct half-length words are within tol of each
    other (left multiplication is an isometry: ``|u w^{-1} - 1| = |u - w|``).
    The longest level is never stored whole: it is regenerated once per band
    of a scalar projection and close pairs are found by sorting each band.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    m = len(generators)
    half = (max_len + 1) // 2
    letters = [i for i in range(1, m + 1)] + [-i for i in range(1, m + 1)]
    mats = {}
    for letter in letters:
        g = generators[abs(letter) - 1].as_array()
        mats[letter] = left_matrix(g if letter > 0 else _conj(g))

    one = np.array([1.0, 0.0, 0.0, 0.0])
    letter_arr = np.array(letters)
    first = np.stack([mats[a] @ one for a in letters])
    levels = [(first, np.full(len(letters), -1), letter_arr)]

    def grow(prev):
        vals, _, last = prev
        for a in letters:
            # prepend a, forbidding cancellation with the current leftmost letter
            keep = np.nonzero(last != -a)[0]
            nv = vals[keep] @ mats[a].T
            nv /= np.linalg.norm(nv, axis=1, keepdims=True)
            yield a, keep, nv

    for _ in range(1, half - 1):
        chunks = list(grow(levels[-1]))
        levels.append((
            np.concatenate([c[2] for c in chunks]),
            np.concatenate([c[1] for c in chunks]),
            np.concatenate([np.full(len(c[1]), c[0]) for c in chunks]),
        ))

    for lvl, (vals, _, _) in enumerate(levels):
        near = np.nonzero(np.linalg.norm(vals - one, axis=1) <= tol)[0]
        if len(near):
            return _trace_word(levels, lvl, int(near[0]))

    def word_of(lvl, row, letter):
        if lvl < len(levels):
            return _trace_word(levels, lvl, row)
        return (letter,) + _trace_word(levels, lvl - 1, row)

    def check_pairs(vals, refs):
        # refs: (k, 3) integer array of (level, row, prepended letter).
        # Two points within tol of each other share a cell of side 2 tol in at
        # least one of four shifted grids on a generic projection plane.
        k1 = vals @ _KEY
        k2 = vals @ _KEY2
        found = set()
        for s1, s2 in ((0.0, 0.0), (tol, 0.0), (0.0, tol), (tol, tol)):
            ids = np.floor((k1 + s1) / (2 * tol)).astype(np.int64) * (1 << 24)
            ids += np.floor((k2 + s2) / (2 * tol)).astype(np.int64)
            srt = np.sort(ids)
            dup = np.unique(srt[1:][srt[1:] == srt[:-1]])
            if not dup.size:
                continue
            pos = np.minimum(np.searchsorted(dup, ids), len(dup) - 1)
            members = np.nonzero(dup[pos] == ids)[0]
            groups: dict[int, list[int]] = {}
            for i in members:
                groups.setdefault(int(ids[i]), []).append(int(i))
            for group in groups.values():
                for x, a in enumerate(group):
                    for b in group[x + 1:]:
                        if np.linalg.norm(vals[a] - vals[b]) <= tol:
                            found.add((a, b))
        found = sorted(found)
        for i, j in found:
            rel = reduce_word(word_of(*refs[i]) + invert_word(word_of(*refs[j])))
            if 0 < len(rel) <= max_len:
                return rel
        return None

    stored_vals = np.concatenate([lv[0] for lv in levels])
    stored_refs = np.concatenate([
        np.stack([np.full(len(lv[0]), lvl), np.arange(len(lv[0])), np.zeros(len(lv[0]), int)], axis=1)
        for lvl, lv in enumerate(levels)
    ])
    if half == len(levels):
        return check_pairs(stored_vals, stored_refs)

    # the final level has about 2m (2m-1)^(half-1) words
    total = len(letters) * (len(letters) - 1) ** (half - 1)
    if bands is None:
        bands = max(1, int(np.ceil(total / 4_000_000)))
    sample_keys = np.sort(levels[-1][0] @ _KEY)
    edges = np.quantile(sample_keys, np.linspace(0, 1, bands + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    stored_keys = stored_vals @ _KEY
    final = len(levels)
    prev_vals, _, prev_last = levels[-1]
    prev_keys_by_letter = {a: prev_vals @ (mats[a].T @ _KEY) for a in letters}
    for b in range(bands):
        lo, hi = edges[b] - tol, edges[b + 1] + tol
        sel = (stored_keys >= lo) & (stored_keys <= hi)
        band_vals = [stored_vals[sel]]
        band_refs = [stored_refs[sel]]
        for a in letters:
            kk = prev_keys_by_letter[a]
            rows = np.nonzero((prev_last != -a) & (kk >= lo) & (kk <= hi))[0]
            band_vals.append(prev_vals[rows] @ mats[a].T)
            band_refs.append(np.stack([np.full(len(rows), final), rows, np.full(len(rows), a)], axis=1))
        rel = check_pairs(np.concatenate(band_vals), np.concatenate(band_refs))
        if rel is not None:
            return rel
    return None


def no_short_relation_check(
    generators: Sequence[UnitQuaternion], max_len: int, tol: float = 1e-6
) -> bool:
    """True iff no nontrivial reduced word of length <= max_len is within tol of 1.

    A necessary condition for freeness, not a proof of it.
    """
    return find_short_relation(generators, max_len, tol) is None


def enumerate_reduced_words(m: int, length: int):
    """All reduced words of exactly ``length`` over m generators and inverses."""
    letters = [i for i in range(1, m + 1)] + [-i for i in range(1, m + 1)]
    for word in itertools.product(letters, repeat=length):
        if all(word[k] != -word[k + 1] for k in range(length - 1)):
            yield word
