"""Derivative-growth diagnostics: bounded along powers of one element, exponential
along the recurrent word sequence.

Rates are reported in natural-log units per letter; raw derivative data stay in
log2 units per iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .circle_flows import LN2, circle_distance
from .recurrence_builder import BuilderConfig, RecurrentSequence
from .rotor import UnitQuaternion
from .skew import SkewGroup, SkewWord

__all__ = [
    "DegenerateWordError",
    "GrowthBoundError",
    "ExponentReport",
    "sample_base_points",
    "sample_fiber_points",
    "sample_words",
    "periodic_exponent",
    "growth_exponent",
    "dichotomy_report",
    "closed_form_gate",
]

SLOPE_TOL = 1e-3
BOUND_SLACK = 1e-6


class DegenerateWordError(ValueError):
    """The base word evaluates to the identity, i.e. it is a relation."""


class GrowthBoundError(RuntimeError):
    """A ray value fell below n/2: the recurrence invariant was broken upstream."""


@dataclass
class ExponentReport:
    label: str
    kind: str
    n: np.ndarray
    log2_derivative: np.ndarray
    translation_norm: np.ndarray | None
    bound: float | None
    slope: float
    rate: float
    verdict: str
    fiber_bound: float | None = None
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        """CSV rows (n, log2_fiber_derivative, translation_norm, bound)."""
        tn = self.translation_norm if self.translation_norm is not None else [None] * len(self.n)
        return [
            (int(n), float(d), None if t is None else float(t), self.bound)
            for n, d, t in zip(self.n, self.log2_derivative, tn)
        ]

    def summary(self) -> dict:
        out = {
            "label": self.label,
            "kind": self.kind,
            "n_max": int(self.n[-1]) if len(self.n) else 0,
            "slope_log2_per_iterate": self.slope,
            "rate": self.rate,
            "verdict": self.verdict,
            "max_log2_derivative": float(np.max(self.log2_derivative)) if len(self.n) else 0.0,
            "bound": self.bound,
            "fiber_bound": self.fiber_bound,
        }
        out.update(self.extra)
        return out


def sample_base_points(count: int) -> np.ndarray:
    """Deterministic low-discrepancy points of S^3 (Halton through Gaussian normalisation)."""
    halton = qmc.Halton(d=4, scramble=False)
    halton.fast_forward(1)  # the first Halton point is the origin
    g = norm.ppf(halton.random(count))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_fiber_points(count: int) -> np.ndarray:
    return (np.arange(count) + 0.5) / count


def sample_words(rng: np.random.Generator, rank: int, count: int, max_len: int = 6) -> list[tuple[int, ...]]:
    """Positive words with uniform length in 1..max_len and uniform letters."""
    words = []
    for _ in range(count):
        length = int(rng.integers(1, max_len + 1))
        words.append(tuple(int(a) for a in rng.integers(1, rank + 1, size=length)))
    return words


def _fit_slope(n: np.ndarray, y: np.ndarray) -> float:
    half = n >= n[-1] / 2
    if half.sum() < 2:
        return 0.0
    return float(np.polyfit(n[half], y[half], 1)[0])


def _positive_sums(word: SkewWord, v: np.ndarray, n_max: int, direction: int) -> np.ndarray:
    """Times fed to F along W^{+-n}; shape (n_max + 1, len(v), 4)."""
    if direction > 0:
        return word.translation_sums(v, n_max)
    # W^{-n}(v, s) = (w^{-n} v, F(-P sum_{j=1..n} w^{-j} v) s)
    p = word.prefix_matrix()
    winv = word.base.inverse().matrix()
    out = np.zeros((n_max + 1, len(v), 4))
    term = v @ winv.T
    acc = np.zeros_like(v)
    for n in range(1, n_max + 1):
        acc += term
        out[n] = -(acc @ p.T)
        term = term @ winv.T
    return out


def periodic_exponent(
    word: SkewWord,
    n_max: int,
    grid: int = 32,
    points: tuple[np.ndarray, np.ndarray] | None = None,
    direction: int = 1,
    slope_tol: float = SLOPE_TOL,
) -> ExponentReport:
    """Max over a grid of log2 |d/ds W^{+-n}| for n = 0..n_max, with its fitted slope.

    The grid is ``grid`` base points times ``grid`` fiber points unless explicit
    ``points = (v_array, s_array)`` are given (each combination is used).
    Verdict is "elliptic" iff |slope| <= slope_tol and the translation bound
    2l/|w - 1| held at every step.
    """
    if not len(word):
        raise DegenerateWordError("the empty word is the identity")
    if word.base.distance(UnitQuaternion.identity()) <= 1e-9:
        raise DegenerateWordError(f"word {word.to_list()} evaluates to the identity")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if points is None:
        vs, ss = sample_base_points(grid), sample_fiber_points(grid)
    else:
        vs, ss = np.atleast_2d(points[0]), np.atleast_1d(points[1])
    flows = word.group.flows
    ns = np.arange(n_max + 1)
    bound = word.translation_bound()
    fiber_bound = bound * flows.sup_field_prime() / LN2

    if word.is_positive:
        sums = _positive_sums(word, vs, n_max, direction)
        tnorm = np.linalg.norm(sums, axis=2).max(axis=1)
        best = np.full(n_max + 1, -np.inf)
        arcs = flows.arc_index(ss)
        for s, j in zip(ss, arcs):
            if j == 0:
                best = np.maximum(best, 0.0)
                continue
            curve = flows.log2_derivative_curve(int(j), float(s), sums[:, :, j - 1])
            best = np.maximum(best, curve.max(axis=1))
        bound_ok = bool(np.all(tnorm <= bound + BOUND_SLACK))
    else:
        v = np.repeat(vs, len(ss), axis=0)
        s = np.tile(ss, len(vs))
        total = np.zeros(len(s))
        best = np.zeros(n_max + 1)
        step = word if direction > 0 else word.inverse()
        for n in range(1, n_max + 1):
            v, s, lj = word.group.apply_word(step, v, s)
            total += lj
            best[n] = total.max()
        tnorm = None
        bound_ok = True

    slope = _fit_slope(ns.astype(float), best)
    fiber_ok = bool(np.all(best <= fiber_bound + BOUND_SLACK))
    verdict = "elliptic" if abs(slope) <= slope_tol and bound_ok and fiber_ok else "not-elliptic"
    return ExponentReport(
        label=str(word) if direction > 0 else f"inv_{word}",
        kind="periodic",
        n=ns,
        log2_derivative=best,
        translation_norm=tnorm,
        bound=bound if word.is_positive else None,
        slope=slope,
        rate=slope * LN2 / len(word),
        verdict=verdict,
        fiber_bound=fiber_bound,
        extra={
            "word": word.to_list(),
            "direction": direction,
            "bound_held": bound_ok,
            "fiber_bound_held": fiber_ok,
            "eigen_angle": float(np.arccos(np.clip(word.base.w, -1, 1))),
        },
    )


def growth_exponent(seq: RecurrentSequence, n_max: int) -> ExponentReport:
    """log2 fiber derivative of W_n at (v0, p_1) for n = 1..n_max.

    At the repelling point p_1 this is exactly the first coordinate of
    v_{w_n} = sum_{k<n} w_k(v0); each term is at least 1 - delta.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    seq.extend(n_max)
    v0 = seq.config.v0_array
    p1 = seq.group.flows.spec(1).center
    values = np.zeros(n_max)
    tnorm = np.zeros(n_max)
    for n in range(1, n_max + 1):
        w = seq.word(n)
        values[n - 1] = w.fiber_log_derivative(v0, p1, 1)
        tnorm[n - 1] = w.translation_sum(v0, 1).norm
    ns = np.arange(1, n_max + 1)
    floor = ns * (1 - seq.config.delta)
    if np.any(values - floor < -1e-9):
        bad = int(ns[np.argmax(values - floor < -1e-9)])
        raise GrowthBoundError(f"log2 derivative of W_{bad} fell below {1 - seq.config.delta} n")
    certified = float(LN2 * np.min(values / ns))
    slope = _fit_slope(ns.astype(float), values)
    return ExponentReport(
        label="ray",
        kind="ray",
        n=ns,
        log2_derivative=values,
        translation_norm=tnorm,
        bound=None,
        slope=slope,
        rate=certified,
        verdict="exponential" if certified >= LN2 / 2 - 1e-9 else "subexponential",
        extra={"certified_rate": certified, "fitted_rate": slope * LN2},
    )


def dichotomy_report(
    config: BuilderConfig,
    n_periodic: int = 2000,
    n_growth: int = 200,
    word_sample: int = 20,
    grid: int = 32,
    seq: RecurrentSequence | None = None,
    words: list[tuple[int, ...]] | None = None,
) -> tuple[dict, list[ExponentReport]]:
    """Every sampled element bounded, the ray exponential.

    The word sample is every single generator plus ``word_sample`` random
    positive words of length <= 6 drawn from ``default_rng([seed, 1])``.
    """
    if seq is None:
        seq = RecurrentSequence.build(config)
    if words is None:
        rng = np.random.default_rng([config.seed, 1])
        words = [(i,) for i in range(1, len(seq.generators) + 1)]
        words += sample_words(rng, len(seq.generators), word_sample)
    reports = []
    skipped = []
    for letters in words:
        w = seq.group.word(letters)
        try:
            reports.append(periodic_exponent(w, n_periodic, grid=grid))
        except DegenerateWordError:
            skipped.append(list(letters))
    growth = growth_exponent(seq, n_growth)
    elliptic = all(r.verdict == "elliptic" for r in reports)
    exponential = growth.rate >= LN2 / 2 - 1e-9
    summary = {
        "periodic": {
            "count": len(reports),
            "vacuous": not reports,
            "all_elliptic": elliptic,
            "max_abs_slope": max((abs(r.slope) for r in reports), default=0.0),
            "degenerate_words": skipped,
            "words": [r.summary() for r in reports],
        },
        "growth": growth.summary(),
        "dichotomy_holds": bool(elliptic and exponential),
    }
    return summary, reports + [growth]


def closed_form_gate(
    group: SkewGroup,
    rng: np.random.Generator,
    n_words: int = 20,
    max_len: int = 4,
    n_max: int = 50,
    n_points: int = 50,
) -> dict:
    """Largest disagreement between W^n by the closed form and by direct iteration.

    Draws ``n_words`` positive words and ``n_points`` points of S^3 x S^1 from
    ``rng``; compares base points, fiber points (circle distance) and log2
    derivatives for every n <= n_max.
    """
    words = sample_words(rng, group.rank, n_words, max_len)
    v = rng.normal(size=(n_points, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    s = rng.random(n_points)
    flows = group.flows
    m, p = len(words), n_points
    wlist = [group.word(letters) for letters in words]

    # closed form: every (word, n, point) in one flattened batch
    times = np.stack([w.translation_sums(v, n_max)[1:] for w in wlist])  # (m, n_max, p, 4)
    cs, cj = flows.apply_batch(times.reshape(-1, 4), np.tile(s, m * n_max))
    cs, cj = cs.reshape(m, n_max, p), cj.reshape(m, n_max, p)
    cv = np.stack([
        np.stack([v @ (w.base ** n).matrix().T for n in range(1, n_max + 1)]) for w in wlist
    ])

    # direct iteration: all words advance together, one letter position at a time
    lengths = np.array([len(w) for w in wlist])
    mats = np.stack([g.matrix() for g in group.generators])
    dv = np.tile(v, (m, 1))
    ds = np.tile(s, m)
    dj = np.zeros(m * p)
    owner = np.repeat(np.arange(m), p)
    errors = np.zeros(m)
    for n in range(n_max):
        for pos in range(lengths.max()):
            active = lengths[owner] > pos
            letter = np.array([
                w.letters[len(w) - 1 - pos] if len(w) > pos else 1 for w in wlist
            ])[owner]
            new_s, lj = flows.apply_batch(dv[active], ds[active])
            dv[active] = np.einsum("nij,nj->ni", mats[letter[active] - 1], dv[active])
            ds[active] = new_s
            dj[active] += lj
        err = np.maximum.reduce([
            np.abs(cv[:, n] - dv.reshape(m, p, 4)).max(axis=(1, 2)),
            circle_distance(cs[:, n], ds.reshape(m, p)).max(axis=1),
            np.abs(cj[:, n] - dj.reshape(m, p)).max(axis=1),
        ])
        errors = np.maximum(errors, err)
    rows = [{"word": list(w), "max_error": float(e)} for w, e in zip(words, errors)]
    return {"max_error": float(errors.max()), "words": rows}
