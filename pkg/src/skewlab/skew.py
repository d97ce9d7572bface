"""Skew products A_i(v, s) = (a_i v, F(v) s) on S^3 x S^1 and words in them.

Every evaluation is batched over points: ``v`` is (N, 4), ``s`` is (N,).
Fiber derivatives are returned in log2 units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .circle_flows import FlowSystem, circle_difference, wrap
from .rotor import (
    UnitQuaternion,
    evaluate_word,
    invert_word,
    partial_sum_bound,
    qmul,
    reduce_word,
)

__all__ = [
    "ProductPoint",
    "TranslationSum",
    "SkewGroup",
    "SkewWord",
    "tangent_frame",
]


class ProductPoint(NamedTuple):
    v: np.ndarray
    s: float


@dataclass(frozen=True)
class TranslationSum:
    n: int
    value: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def _as_batch(v, s):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if len(v) != len(s):
        raise ValueError(f"{len(v)} base points but {len(s)} fiber points")
    return v, wrap(s)


@dataclass(frozen=True)
class SkewGroup:
    """Generators a_1..a_m in SU(2) together with the fiber flows F."""

    generators: tuple[UnitQuaternion, ...]
    flows: FlowSystem = field(default_factory=FlowSystem)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def rank(self) -> int:
        return len(self.generators)

    def word(self, letters: Sequence[int]) -> "SkewWord":
        return SkewWord(tuple(letters), self)

    def _matrix(self, letter: int) -> np.ndarray:
        if letter == 0 or abs(letter) > self.rank:
            raise IndexError(f"letter {letter} out of range for {self.rank} generators")
        m = self.generators[abs(letter) - 1].matrix()
        return m if letter > 0 else m.T

    # -- direct evaluation ---------------------------------------------

    def apply_generator(self, letter: int, v, s):
        """A_i^{+-1} on a batch. Returns (v', s', log2 ds'/ds).

        A_i(v, s) = (a_i v, F(v) s);  A_i^{-1}(v, s) = (a_i^{-1} v, F(-a_i^{-1} v) s).
        """
        v, s = _as_batch(v, s)
        new_v = v @ self._matrix(letter).T
        times = v if letter > 0 else -new_v
        new_s, log2j = self.flows.apply_batch(times, s)
        return new_v, new_s, log2j

    def apply_word(self, word: "SkewWord | Sequence[int]", v, s):
        """Apply the letters right to left; log2 derivatives add by the chain rule."""
        letters = word.letters if isinstance(word, SkewWord) else tuple(word)
        v, s = _as_batch(v, s)
        v, s = v.copy(), s.copy()
        total = np.zeros(len(s))
        for letter in reversed(letters):
            v, s, lj = self.apply_generator(letter, v, s)
            total += lj
        return v, s, total

    def iterate_direct(self, word: "SkewWord | Sequence[int]", v, s, n: int):
        """W^n by repeated application (n < 0 iterates the inverse word)."""
        letters = word.letters if isinstance(word, SkewWord) else tuple(word)
        if n < 0:
            letters, n = invert_word(letters), -n
        v, s = _as_batch(v, s)
        total = np.zeros(len(s))
        for _ in range(n):
            v, s, lj = self.apply_word(letters, v, s)
            total += lj
        return v, s, total


@dataclass(frozen=True)
class SkewWord:
    """Reduced word ``A_{i_l} ... A_{i_1}`` as signed 1-based indices in product order."""

    letters: tuple[int, ...]
    group: SkewGroup = field(repr=False, compare=False)

    def __post_init__(self):
        reduced = reduce_word(self.letters)
        for letter in reduced:
            if abs(letter) > self.group.rank:
                raise IndexError(f"letter {letter} out of range for {self.group.rank} generators")
        object.__setattr__(self, "letters", reduced)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "_".join(str(a) for a in self.letters) or "e"

    @property
    def is_positive(self) -> bool:
        return all(a > 0 for a in self.letters)

    @property
    def base(self) -> UnitQuaternion:
        return evaluate_word(self.letters, self.group.generators)

    def inverse(self) -> "SkewWord":
        return SkewWord(invert_word(self.letters), self.group)

    def rotate(self, k: int) -> "SkewWord":
        """Cyclic rotation of the letters."""
        if not self.letters:
            return self
        k %= len(self.letters)
        return SkewWord(self.letters[k:] + self.letters[:k], self.group)

    def translation_bound(self) -> float:
        """``2 l / |w - 1|``, a uniform bound on |v_{n,w}| over unit v and all n."""
        return len(self) * partial_sum_bound(self.base)

    def to_list(self) -> list[int]:
        return list(self.letters)

    # -- closed form -----------------------------------------------------

    def _require_positive(self):
        if not self.is_positive:
            raise ValueError("the closed form is available for positive words only")

    def prefix_matrix(self) -> np.ndarray:
        """Sum of left-multiplication matrices of the prefixes a_{i_j}...a_{i_1}, j = 0..l-1."""
        self._require_positive()
        prefix = np.eye(4)
        total = np.zeros((4, 4))
        for letter in reversed(self.letters):
            total += prefix
            prefix = self.group._matrix(letter) @ prefix
        return total

    def translation_sums(self, v, n_max: int) -> np.ndarray:
        """v_{n,w}(v) for n = 0..n_max and a batch of v; shape (n_max + 1, N, 4)."""
        self._require_positive()
        if n_max < 0:
            raise ValueError("n_max must be non-negative")
        v = np.atleast_2d(np.asarray(v, dtype=float))
        wm = self.base.matrix()
        p = self.prefix_matrix()
        out = np.zeros((n_max + 1, len(v), 4))
        term = v.copy()
        acc = np.zeros_like(v)
        for n in range(1, n_max + 1):
            acc += term
            out[n] = acc @ p.T
            term = term @ wm.T
        return out

    def translation_sum(self, v, n: int) -> TranslationSum:
        """v_{n,w} = sum_j sum_{k<n} prefix_j w^k v (prefix_0 = identity)."""
        self._require_positive()
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            return TranslationSum(0, np.zeros(4))
        v = np.asarray(v, dtype=float)
        wm = self.base.matrix()
        term, acc = v.copy(), np.zeros(4)
        for _ in range(n):
            acc += term
            term = wm @ term
        return TranslationSum(n, self.prefix_matrix() @ acc)

    def iterate_closed_form(self, v, s, n: int):
        """W^n(v, s) = (w^n v, F(v_{n,w}) s) on a batch; returns (v', s', log2 ds'/ds).

        Negative n uses W^{-n}(v, s) = (w^{-n} v, F(-v_{n,w}(w^{-n} v)) s).
        """
        self._require_positive()
        v, s = _as_batch(v, s)
        w = self.base
        if n >= 0:
            wn = (w ** n).matrix()
            times = self._batch_sums(v, n)
            new_v = v @ wn.T
        else:
            new_v = v @ (w ** n).matrix().T
            times = -self._batch_sums(new_v, -n)
        new_s, log2j = self.group.flows.apply_batch(times, s)
        return new_v, new_s, log2j

    def _batch_sums(self, v, n):
        if n == 0:
            return np.zeros_like(v)
        wm = self.base.matrix()
        term, acc = v.copy(), np.zeros_like(v)
        for _ in range(n):
            acc += term
            term = term @ wm.T
        return acc @ self.prefix_matrix().T

    def fiber_log_derivative(self, v, s, n: int, method: str = "closed"):
        """log2 |d s'/d s| of W^n at (v, s); ``method`` is "closed" or "chain"."""
        if method == "closed" and self.is_positive:
            _, _, lj = self.iterate_closed_form(v, s, n)
        elif method in ("closed", "chain"):
            _, _, lj = self.group.iterate_direct(self, v, s, n)
        else:
            raise ValueError(f"unknown method {method!r}")
        return lj if np.ndim(s) else float(lj[0])

    # -- finite differences ---------------------------------------------

    def full_jacobian_fd(self, v, s: float, h: float = 1e-5) -> np.ndarray:
        """Central-difference derivative of W at (v, s) in orthonormal frames.

        Rows and columns are (three tangent directions of S^3, the circle direction).
        """
        if not 1e-6 <= h <= 1e-4:
            raise ValueError("step must lie in [1e-6, 1e-4]")
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        v_img, s_img, _ = self.group.apply_word(self, v, s)
        out_frame = tangent_frame(v_img[0])
        jac = np.zeros((4, 4))
        in_frame = tangent_frame(v)
        for a in range(4):
            if a < 3:
                vp = v + h * in_frame[a]
                vm = v - h * in_frame[a]
                vp, vm = vp / np.linalg.norm(vp), vm / np.linalg.norm(vm)
                sp = sm = s
            else:
                vp = vm = v
                sp, sm = s + h, s - h
            bp, fp, _ = self.group.apply_word(self, vp, sp)
            bm, fm, _ = self.group.apply_word(self, vm, sm)
            jac[:3, a] = out_frame @ (bp[0] - bm[0]) / (2 * h)
            jac[3, a] = float(circle_difference(fp[0], fm[0])) / (2 * h)
        return jac


def tangent_frame(v) -> np.ndarray:
    """Orthonormal basis (v i, v j, v k) of the tangent space of S^3 at unit v."""
    v = np.asarray(v, dtype=float)
    basis = np.eye(4)[1:]
    return qmul(np.broadcast_to(v, (3, 4)), basis)
