"""Generator sets in SU(2) whose words keep a base point v0 within delta of itself.

A drift element ``h`` walks v0 out of the inner ball B(delta/2); once the
point reaches the annulus B(delta) - B(delta/2), a correction element from a
finite cover S' brings it back inside B(delta/2).  The resulting infinite
letter sequence has every prefix word w_n with |w_n(v0) - v0| <= delta.

Randomness: a single ``numpy.random.default_rng(seed)`` (PCG64) stream,
consumed in this order: drift axis (3 normals), drift perturbation, the Haar
test net of the annulus, one perturbation per cover element, then any
enlargement perturbations.  Retries after a
failed relation check keep drawing from the same stream.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .rotor import (
    UnitQuaternion,
    evaluate_word,
    find_short_relation,
    qmul,
    random_rotation,
)
from .skew import SkewGroup, SkewWord

log = logging.getLogger(__name__)

__all__ = [
    "BuilderConfig",
    "ConstructionError",
    "RecurrentSequence",
    "annulus_net",
    "annulus_test_net",
    "build_cover",
    "cover_centres",
    "build_drift",
    "build_generators",
    "cover_failures",
]

_ONE = np.array([1.0, 0.0, 0.0, 0.0])


class ConstructionError(RuntimeError):
    """The cover or drift element could not be built with the requested parameters."""


@dataclass(frozen=True)
class BuilderConfig:
    v0: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    delta: float = 0.5
    epsilon: float = 0.03
    theta_h: float = 0.1
    eta: float | None = None
    seed: int = 42
    test_points: int = 10_000
    enlarge_rounds: int = 5
    relation_length: int = 8
    relation_tol: float = 1e-6
    relation_retries: int = 3

    def __post_init__(self):
        if self.eta is None:
            object.__setattr__(self, "eta", self.epsilon / 10)
        object.__setattr__(self, "v0", tuple(float(c) for c in self.v0))
        self.validate()

    def validate(self):
        v0 = np.asarray(self.v0)
        if v0.shape != (4,) or abs(np.linalg.norm(v0) - 1.0) > 1e-12:
            raise ValueError("v0 must be a unit vector in R^4")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.epsilon < self.delta / 4:
            raise ValueError("need 0 < epsilon < delta/4")
        if not 0 < 2 * np.sin(self.theta_h / 2) <= self.delta / 4 or self.theta_h >= np.pi:
            raise ValueError("need 0 < 2 sin(theta_h/2) <= delta/4")
        if not 0 <= self.eta <= self.epsilon / 10:
            raise ValueError("need 0 <= eta <= epsilon/10")
        if self.test_points < 1 or self.relation_length < 0:
            raise ValueError("test_points must be >= 1 and relation_length >= 0")

    @property
    def v0_array(self) -> np.ndarray:
        return np.asarray(self.v0)

    def to_dict(self) -> dict:
        return asdict(self) | {"v0": list(self.v0)}


def _shell_radii(delta: float) -> tuple[float, float]:
    # chordal distance |v0 exp(xi) - v0| = 2 sin(|xi|/2)
    return 2 * np.arcsin(delta / 4), 2 * np.arcsin(min(delta / 2, 1.0))


def _exp_points(v0: np.ndarray, xi: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(xi, axis=1, keepdims=True)
    safe = np.where(r > 0, r, 1.0)
    e = np.concatenate([np.cos(r), np.sin(r) * xi / safe], axis=1)
    return qmul(np.broadcast_to(v0, e.shape), e)


def _in_annulus(points: np.ndarray, v0: np.ndarray, delta: float) -> np.ndarray:
    d = np.linalg.norm(points - v0, axis=1)
    return (d >= delta / 2) & (d < delta)


def annulus_net(config: BuilderConfig, test: np.ndarray, max_samples: int = 2_000_000) -> np.ndarray:
    """Halton points of the annulus, grown until they epsilon-cover ``test``."""
    v0, eps = config.v0_array, config.epsilon
    _, r_hi = _shell_radii(config.delta)
    halton = qmc.Halton(d=3, scramble=False)
    chunks = []
    drawn = 0
    while drawn < max_samples:
        xi = (2 * halton.random(16384) - 1) * r_hi
        drawn += len(xi)
        pts = _exp_points(v0, xi)
        chunks.append(pts[_in_annulus(pts, v0, config.delta)])
        net = np.concatenate(chunks)
        if cKDTree(net).query(test)[0].max() <= eps:
            return net
    raise ConstructionError("annulus net did not reach epsilon resolution; increase max_samples")


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * i / n)
    azimuth = np.pi * (1 + 5 ** 0.5) * i
    return np.stack(
        [np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)], axis=1
    )


def _greedy_centres(net: np.ndarray, reach: float, max_candidates: int = 20_000) -> np.ndarray:
    """Greedy set cover of the net by balls of radius ``reach`` centred at net points."""
    step = max(1, len(net) // max_candidates)
    candidates = net[::step]
    pairs = cKDTree(candidates).sparse_distance_matrix(cKDTree(net), reach, output_type="coo_matrix")
    incidence = sparse.csr_matrix((np.ones(pairs.nnz), (pairs.row, pairs.col)), shape=(len(candidates), len(net)))
    uncovered = np.ones(len(net))
    chosen = []
    while uncovered.any():
        k = int(np.argmax(incidence @ uncovered))
        row = incidence.indices[incidence.indptr[k]:incidence.indptr[k + 1]]
        if not uncovered[row].any():
            raise ConstructionError("net points out of reach of every candidate centre")
        chosen.append(k)
        uncovered[row] = 0.0
    return candidates[chosen]


def cover_centres(config: BuilderConfig, net: np.ndarray, max_shell: int = 400) -> np.ndarray:
    """Centres around v0 whose balls of radius ``delta/2 - epsilon - 2 eta``
    contain every net point.

    Tries the fewest points of a single Fibonacci shell first; when the reach is
    too small for one shell to span the annulus, falls back to a greedy cover
    centred at net points.
    """
    v0, delta = config.v0_array, config.delta
    reach = delta / 2 - config.epsilon - 2 * config.eta
    r_lo, r_hi = _shell_radii(delta)
    if r_hi - r_lo < 2 * reach:
        for n in range(4, max_shell + 1):
            for frac in (0.75, 0.7, 0.8, 0.65, 0.85):
                rho = 2 * np.arcsin(min(frac * delta / 2, 1.0))
                centres = _exp_points(v0, rho * _fibonacci_sphere(n))
                if cKDTree(centres).query(net)[0].max() <= reach:
                    return centres
    return _greedy_centres(net, reach)


def annulus_test_net(config: BuilderConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform (Haar) samples of S^3 conditioned on the annulus, by rejection."""
    v0 = config.v0_array
    out: list[np.ndarray] = []
    count = 0
    while count < size:
        pts = rng.normal(size=(65536, 4))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        pts = pts[_in_annulus(pts, v0, config.delta)]
        out.append(pts)
        count += len(pts)
    return np.concatenate(out)[:size]


def _covers(cover: list[UnitQuaternion], points: np.ndarray, v0: np.ndarray, delta: float) -> np.ndarray:
    """Boolean (len(cover), len(points)): does g send p into the open ball B(delta/2)?"""
    out = np.zeros((len(cover), len(points)), dtype=bool)
    for k, g in enumerate(cover):
        out[k] = np.linalg.norm(points @ g.matrix().T - v0, axis=1) < delta / 2
    return out


def cover_failures(cover, points, config: BuilderConfig) -> np.ndarray:
    """Indices of points not sent into B(delta/2) by any element of the cover."""
    if not len(cover):
        return np.arange(len(points))
    hit = _covers(cover, points, config.v0_array, config.delta).any(axis=0)
    return np.nonzero(~hit)[0]


def _point_to_center(v0: np.ndarray, q: np.ndarray) -> UnitQuaternion:
    # g q = v0 for g = v0 q^{-1}
    return UnitQuaternion.from_array(qmul(v0, q * np.array([1.0, -1.0, -1.0, -1.0])))


def build_cover(config: BuilderConfig, rng: np.random.Generator) -> list[UnitQuaternion]:
    """The correction set S'.

    A correction ``g_c = v0 c^{-1}`` maps the ball B(c, r) isometrically onto
    B(v0, r).  The annulus net epsilon-covers a Haar test net, and the centres
    c are chosen so their balls of radius ``delta/2 - epsilon - 2 eta`` contain
    the whole net; after an eta-perturbation every annulus point then still
    lands in B(delta/2).  Coverage is re-checked on the test net and the set
    enlarged with exact point-to-centre maps if anything is missed.
    """
    v0, delta, eta = config.v0_array, config.delta, config.eta
    test = annulus_test_net(config, rng, config.test_points)
    net = annulus_net(config, test)
    centres = cover_centres(config, net)
    log.info("annulus net of %d points covered by %d centres", len(net), len(centres))

    cover = [random_rotation(rng, eta) * _point_to_center(v0, c) for c in centres]
    for _ in range(config.enlarge_rounds):
        missed = cover_failures(cover, test, config)
        if not len(missed):
            return cover
        log.warning("cover misses %d test points; enlarging", len(missed))
        pending = list(missed)
        while pending:
            p = test[pending[0]]
            g = random_rotation(rng, eta) * _point_to_center(v0, p)
            cover.append(g)
            hit = _covers([g], test[pending], v0, delta)[0]
            pending = [k for k, h in zip(pending, hit) if not h]
    if len(cover_failures(cover, test, config)):
        raise ConstructionError("cover still fails after enlargement; epsilon too coarse for eta")
    return cover


def build_drift(config: BuilderConfig, rng: np.random.Generator) -> UnitQuaternion:
    """Small rotation h with |h - 1| <= delta/4 whose v0-orbit leaves B(delta/2)."""
    axis = rng.normal(size=3)
    h = random_rotation(rng, config.eta) * UnitQuaternion.from_axis_angle(axis, config.theta_h)
    if np.linalg.norm(h.as_array() - _ONE) > config.delta / 4:
        raise ConstructionError("perturbed drift moves points further than delta/4")
    limit = 10 * int(np.ceil(np.pi / config.theta_h))
    v0 = config.v0_array
    p = v0.copy()
    m = h.matrix()
    for _ in range(limit):
        p = m @ p
        if np.linalg.norm(p - v0) >= config.delta / 2:
            return h
    raise ConstructionError(f"drift orbit stayed in B(delta/2) for {limit} steps")


def build_generators(config: BuilderConfig) -> tuple[list[UnitQuaternion], int]:
    """S = S' + [h] with h last, plus the number of relation-check retries used."""
    rng = np.random.default_rng(config.seed)
    for attempt in range(config.relation_retries + 1):
        h = build_drift(config, rng)
        cover = build_cover(config, rng)
        gens = cover + [h]
        if config.relation_length == 0:
            return gens, attempt
        rel = find_short_relation(gens, config.relation_length, config.relation_tol)
        if rel is None:
            return gens, attempt
        log.warning("generator set has short relation %s; re-drawing perturbations", rel)
    raise ConstructionError("no relation-free generator set within the retry budget")


@dataclass
class RecurrentSequence:
    """Generators plus the greedily extended letter sequence i_1, i_2, ...

    ``positions[n]`` is w_n(v0) with w_0 the identity; ``indices[n-1]`` is the
    1-based letter i_n, so w_n = a_{i_n} w_{n-1}.
    """

    config: BuilderConfig
    generators: list[UnitQuaternion]
    indices: list[int] = field(default_factory=list)
    positions: list[np.ndarray] = field(default_factory=list)
    retries: int = 0

    @classmethod
    def build(cls, config: BuilderConfig) -> "RecurrentSequence":
        gens, retries = build_generators(config)
        return cls(config, gens, retries=retries)

    def __post_init__(self):
        if not self.positions:
            self.positions = [self.config.v0_array.copy()]
        self._mats = [g.matrix() for g in self.generators]
        self._group = SkewGroup(tuple(self.generators))

    @property
    def drift_index(self) -> int:
        return len(self.generators)

    @property
    def group(self) -> SkewGroup:
        return self._group

    def __len__(self) -> int:
        return len(self.indices)

    def _choose(self, p: np.ndarray) -> int:
        v0, delta = self.config.v0_array, self.config.delta
        d = np.linalg.norm(p - v0)
        if d < delta / 2:
            return self.drift_index
        if d < delta:
            for k, m in enumerate(self._mats[:-1]):
                if np.linalg.norm(m @ p - v0) < delta / 2:
                    return k + 1
            raise ConstructionError(f"no correction sends annulus point {p} into B(delta/2)")
        raise RuntimeError(f"orbit escaped B(delta): |w_n(v0) - v0| = {d}")

    def extend(self, target_n: int) -> "RecurrentSequence":
        v0, delta = self.config.v0_array, self.config.delta
        while len(self.indices) < target_n:
            p = self.positions[-1]
            k = self._choose(p)
            q = self._mats[k - 1] @ p
            q /= np.linalg.norm(q)
            if np.linalg.norm(q - v0) > delta:
                raise RuntimeError(f"step {len(self.indices) + 1} left B(delta)")
            self.indices.append(k)
            self.positions.append(q)
        return self

    def word(self, n: int) -> SkewWord:
        """W_n = A_{i_n} ... A_{i_1}."""
        if n > len(self.indices):
            raise ValueError(f"sequence has {len(self.indices)} letters, {n} requested")
        return SkewWord(tuple(reversed(self.indices[:n])), self._group)

    def base_word_value(self, n: int) -> UnitQuaternion:
        return evaluate_word(tuple(reversed(self.indices[:n])), self.generators)

    def running_sums(self) -> np.ndarray:
        """v_{w_n} = sum_{k<n} w_k(v0) for n = 0..len; shape (len + 1, 4)."""
        pos = np.array(self.positions)
        return np.vstack([np.zeros(4), np.cumsum(pos[:-1], axis=0)])

    def diagnostics(self) -> list[tuple[int, int, float, float]]:
        """Rows (n, i_n, |w_n(v0) - v0|, (v_{w_n})_x) for n >= 1."""
        v0 = self.config.v0_array
        sums = self.running_sums()
        return [
            (n, self.indices[n - 1], float(np.linalg.norm(self.positions[n] - v0)), float(sums[n][0]))
            for n in range(1, len(self.indices) + 1)
        ]
