import itertools
import math

import numpy as np
import pytest

from skewlab.burnside import (
    BallTable,
    GrigorchukElement,
    OrderCapExceeded,
    RadiusExceeded,
    act_on_sequence,
    element_order,
    geodesic_length,
    geodesic_ray_exponent,
    is_trivial,
    operator_norm,
    periodic_banach_exponent,
    power_lengths,
    reduce,
    sections,
    truncated_norm,
    word_length,
)

LEAVES8 = list(itertools.product((0, 1), repeat=8))


@pytest.fixture(scope="module")
def table():
    return BallTable(radius=10)


def reduced_words(max_len):
    out = {""}
    frontier = {""}
    for _ in range(max_len):
        frontier = {reduce(w + x) for w in frontier for x in "abcd"} - out
        frontier = {w for w in frontier if len(w) == max(len(u) for u in frontier)} if frontier else set()
        out |= frontier
    return sorted(out)


def acts_trivially_depth8(word):
    return all(act_on_sequence(word, leaf) == leaf for leaf in LEAVES8)


def test_reduction_rules():
    assert reduce("aa") == "" and reduce("bc") == "d" and reduce("cdb") == ""
    assert reduce("abba") == ""
    w = reduce("abcacdbadbca")
    assert all((x == "a") != (y == "a") for x, y in zip(w, w[1:]))
    with pytest.raises(ValueError):
        reduce("ax")


def test_section_examples():
    assert sections("") == ("", "", False)
    assert sections("a") == ("", "", True)
    assert sections("b") == ("a", "c", False)
    assert sections("d") == ("", "b", False)


def test_sections_reproduce_tree_action():
    for word in reduced_words(6):
        left, right, swap = sections(word)
        for leaf in itertools.product((0, 1), repeat=5):
            img = act_on_sequence(word, leaf)
            head = 1 - leaf[0] if swap else leaf[0]
            assert img[0] == head
            assert img[1:] == act_on_sequence(left if leaf[0] == 0 else right, leaf[1:])


def test_contraction():
    for word in reduced_words(9):
        if len(word) >= 2:
            left, right, _ = sections(word)
            assert len(left) + len(right) <= len(word) + 1


def test_word_problem_against_depth8_tree():
    words = [w for w in reduced_words(8)]
    assert len(words) > 300
    for w in words:
        assert is_trivial(w) == acts_trivially_depth8(w), w


def test_relations():
    for w in ("aa", "bb", "cc", "dd", "bcd", "bdc", "cbd", "adadadad"):
        assert is_trivial(w)
    assert not is_trivial("adad")
    assert GrigorchukElement("bc").equals(GrigorchukElement("d"))
    assert (GrigorchukElement("ad") ** 4).is_trivial()
    assert GrigorchukElement("abc").inverse().word == reduce("cba")


def test_ball_against_level12_quotient(table):
    # BFS in the finite quotient acting on level 12 counts distinct actions,
    # which equal distinct elements in a ball this small
    depth = 12
    n = 1 << depth
    gens = {}
    for x in "abcd":
        perm = np.empty(n, dtype=np.int64)
        for k in range(n):
            bits = tuple((k >> (depth - 1 - i)) & 1 for i in range(depth))
            img = act_on_sequence(x, bits)
            perm[k] = sum(b << (depth - 1 - i) for i, b in enumerate(img))
        gens[x] = perm
    seen = {np.arange(n).tobytes()}
    frontier = [np.arange(n)]
    sizes = [1]
    for _ in range(10):
        nxt = []
        for p in frontier:
            for x in "abcd":
                q = gens[x][p]
                if q.tobytes() not in seen:
                    seen.add(q.tobytes())
                    nxt.append(q)
        frontier = nxt
        sizes.append(len(seen))
    assert table.sizes == sizes


def test_representatives_distinct_and_geodesic(table):
    words = table.ball(5)
    for u, w in itertools.combinations(words, 2):
        assert not is_trivial(u + w[::-1])
    for w in words:
        assert len(w) >= word_length(w, table)


def test_word_length_examples(table):
    assert word_length("", table) == 0
    assert word_length("a", table) == 1
    assert word_length("adad", table) == 4
    assert word_length("bcd" + "a", table) == 1
    with pytest.raises(RadiusExceeded):
        word_length("ab" * 7 + "a", BallTable(radius=3))


def test_split_length_matches_table(table):
    small = BallTable(radius=5)
    for w in table.sphere(9)[:40] + table.sphere(10)[:40]:
        assert geodesic_length(w, small) == word_length(w, table)


def test_triangle_inequality(table):
    ball = table.ball(3)
    for g in ball:
        for h in ball:
            assert word_length(g + h, table) <= word_length(g, table) + word_length(h, table)


def test_operator_norm_and_truncation(table):
    assert operator_norm("", table) == (1.0, 0)
    assert operator_norm("a", table) == (2.0, 1)
    assert truncated_norm("ab", table, 4) == word_length("ab", table) == 2
    for g in table.ball(3):
        assert truncated_norm(g, table, 4) == word_length(g, table)


def test_element_orders():
    assert element_order("") == 1
    assert element_order("a") == 2
    assert element_order("ad") == 4
    assert element_order("ab") == 16
    with pytest.raises(OrderCapExceeded):
        element_order("ab", cap=8)
    with pytest.raises(ValueError):
        element_order("a", cap=6)


def test_torsion_up_to_length6(table):
    for g in table.ball(6):
        k = element_order(g)
        assert k & (k - 1) == 0 and k <= 256
        assert is_trivial(g * k)


def test_periodic_exponent_examples(table):
    bound, values = periodic_banach_exponent("a", 100, table)
    assert bound <= math.log(2) / 50 + 1e-15
    assert len(values) == 100
    lengths = power_lengths("ad", table)
    assert lengths == [0, 2, 4, 2]
    bound, _ = periodic_banach_exponent("ad", 100, table)
    assert bound <= max(lengths) * math.log(2) * 2 / 100 + 1e-15


def test_geodesic_ray(table):
    rate, witness = geodesic_ray_exponent(table, 1)
    assert rate == math.log(2) and witness == "a"
    rate, witness = geodesic_ray_exponent(table, 10)
    assert len(witness) == 10
    assert all(word_length(witness[:k], table) == k for k in range(11))
    assert all(x < y for x, y in zip(table.sizes, table.sizes[1:]))
