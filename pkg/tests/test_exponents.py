import numpy as np
import pytest

from skewlab.circle_flows import LN2
from skewlab.exponents import (
    DegenerateWordError,
    closed_form_gate,
    growth_exponent,
    periodic_exponent,
    sample_base_points,
    sample_fiber_points,
    sample_words,
)
from skewlab.rotor import UnitQuaternion, random_unit_quaternion
from skewlab.skew import SkewGroup


def test_samples():
    v = sample_base_points(64)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)
    assert np.array_equal(v, sample_base_points(64))
    s = sample_fiber_points(8)
    assert s[0] == 1 / 16 and s[-1] == 15 / 16
    words = sample_words(np.random.default_rng(0), 5, 100)
    assert all(1 <= len(w) <= 6 and all(1 <= a <= 5 for a in w) for w in words)


def test_periodic_exponent_of_single_generator(rng):
    group = SkewGroup((random_unit_quaternion(rng), random_unit_quaternion(rng)))
    rep = periodic_exponent(group.word((1,)), 400, grid=8)
    assert rep.verdict == "elliptic"
    assert abs(rep.slope) < 1e-3
    assert np.all(rep.translation_norm <= rep.bound + 1e-9)
    assert np.all(rep.log2_derivative <= rep.fiber_bound + 1e-9)
    assert len(rep.rows()) == 401


def test_periodic_exponent_matches_direct_pointwise(rng):
    group = SkewGroup((random_unit_quaternion(rng), random_unit_quaternion(rng)))
    w = group.word((2, 1))
    v = sample_base_points(3)
    s = np.array([0.05, 0.3])
    rep = periodic_exponent(w, 20, points=(v, s))
    vv, ss = np.repeat(v, 2, axis=0), np.tile(s, 3)
    for n in (5, 20):
        _, _, lj = group.iterate_direct(w, vv, ss, n)
        assert rep.log2_derivative[n] == pytest.approx(lj.max(), abs=1e-8)


def test_mixed_sign_words_use_direct_iteration(rng):
    group = SkewGroup((random_unit_quaternion(rng), random_unit_quaternion(rng)))
    rep = periodic_exponent(group.word((1, -2)), 60, grid=4)
    assert rep.bound is None and rep.verdict == "elliptic"


def test_degenerate_word_rejected():
    group = SkewGroup((UnitQuaternion.identity(),))
    with pytest.raises(DegenerateWordError):
        periodic_exponent(group.word((1,)), 10)
    with pytest.raises(DegenerateWordError):
        periodic_exponent(group.word(()), 10)


def test_growth_at_repelling_point(quick_sequence):
    rep = growth_exponent(quick_sequence, 100)
    sums = quick_sequence.running_sums()
    np.testing.assert_allclose(rep.log2_derivative, sums[1:101, 0], atol=1e-9)
    assert rep.rate >= LN2 / 2
    assert rep.verdict == "exponential"
    with pytest.raises(ValueError):
        growth_exponent(quick_sequence, 0)


def test_closed_form_gate_small(rng):
    group = SkewGroup(tuple(random_unit_quaternion(rng) for _ in range(3)))
    out = closed_form_gate(group, np.random.default_rng(7), n_words=4, n_max=10, n_points=10)
    assert out["max_error"] < 1e-8 and len(out["words"]) == 4


def test_slope_stable_under_doubling(quick_sequence):
    w = quick_sequence.group.word((1, 5, 2))
    a = periodic_exponent(w, 1000, grid=12)
    b = periodic_exponent(w, 2000, grid=12)
    assert abs(a.slope - b.slope) <= 5e-4


def test_rotation_invariance(quick_sequence):
    w = quick_sequence.group.word((3, 7, 11))
    rates = [periodic_exponent(w.rotate(k), 1000, grid=12).rate for k in range(3)]
    assert max(rates) - min(rates) <= 2e-3


def test_negative_direction_bounded(quick_sequence):
    rep = periodic_exponent(quick_sequence.group.word((1,)), 1000, grid=12, direction=-1)
    assert rep.verdict == "elliptic" and rep.label.startswith("inv_")


def test_points_off_the_arcs_never_move(quick_sequence):
    gaps = np.array([0.2, 0.45, 0.7, 0.95])  # between the support arcs
    rep = periodic_exponent(quick_sequence.group.word((2,)), 200, points=(sample_base_points(5), gaps))
    assert np.all(rep.log2_derivative == 0.0)
