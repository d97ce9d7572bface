"""Acceptance criteria 1-9, each printing one PASS/FAIL line."""

import filecmp
import json
import math
import time

import numpy as np
import pytest

from conftest import report
from skewlab.burnside import (
    BallTable,
    element_order,
    geodesic_ray_exponent,
    is_trivial,
    periodic_banach_exponent,
    word_length,
)
from skewlab.circle_flows import LN2, FlowSystem
from skewlab.cli import main
from skewlab.exponents import closed_form_gate, growth_exponent, periodic_exponent, sample_words
from skewlab.recurrence_builder import BuilderConfig, RecurrentSequence
from skewlab.rotor import (
    eigen_angle,
    no_short_relation_check,
    partial_sum_bound,
    partial_sum_closed_form,
    random_unit_quaternion,
)

SEED = 42


def test_criterion_1_geometric_series_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng([SEED, 2])
    ns = np.arange(1, 1001)
    worst_excess, worst_err, trials = -np.inf, 0.0, 0
    while trials < 200:
        q = random_unit_quaternion(rng)
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        if eigen_angle(q) < 0.05:
            continue
        trials += 1
        m = q.matrix()
        terms = np.empty((1000, 4))
        term = v.copy()
        for k in range(1000):
            terms[k] = term
            term = m @ term
        iterated = np.cumsum(terms, axis=0)
        closed = partial_sum_closed_form(q, v, ns)
        worst_excess = max(worst_excess, float(np.linalg.norm(iterated, axis=1).max() - partial_sum_bound(q)))
        worst_err = max(worst_err, float(np.abs(iterated - closed).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 1e-8 and worst_err <= 1e-9 and elapsed < 5
    report("1", ok, f"max |S_n| - 2/|q-1| = {worst_excess:.3e}, closed-form error {worst_err:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_flow_calibration():
    t0 = time.perf_counter()
    flows = FlowSystem()
    p1 = flows.spec(1).center
    closed = flows.flow_derivative(1, 1.0, p1)
    ode = flows.flow_derivative(1, 1.0, p1, force_ode=True)
    rng = np.random.default_rng([SEED, 4])
    group_err = comm_err = 0.0
    for _ in range(40):
        i = int(rng.integers(1, 5))
        t, u = rng.uniform(-10, 10, size=2)
        lo, hi = flows.spec(i).arc
        s = rng.uniform(lo, hi)
        group_err = max(group_err, abs(flows.flow(i, t, flows.flow(i, u, s)) - flows.flow(i, t + u, s)))
        j = i % 4 + 1
        s2 = rng.random()
        comm_err = max(comm_err, abs(flows.flow(i, t, flows.flow(j, u, s2)) - flows.flow(j, u, flows.flow(i, t, s2))))
    elapsed = time.perf_counter() - t0
    ok = closed == 2.0 and abs(ode - 2) <= 1e-6 and group_err <= 1e-8 and comm_err <= 1e-12 and elapsed < 10
    report("2", ok, f"closed {closed!r}, ODE {ode!r}, group law {group_err:.1e}, commutation {comm_err:.1e}, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def gate(sequence):
    t0 = time.perf_counter()
    out = closed_form_gate(sequence.group, np.random.default_rng([SEED, 3]), n_words=20, max_len=4, n_max=50, n_points=50)
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_criterion_3_closed_form_gate(gate):
    ok = gate["max_error"] <= 1e-6
    report("3", ok, f"20 words, n <= 50, 50 points: max disagreement {gate['max_error']:.2e} ({gate['elapsed']:.1f}s)")
    assert ok


@pytest.fixture
def gated(sequence, gate):
    if gate["max_error"] > 1e-6:
        pytest.fail("closed-form gate (criterion 3) failed; prefix convention not pinned")
    return sequence


def test_criterion_4_recurrence(gated):
    t0 = time.perf_counter()
    fresh = RecurrentSequence.build(BuilderConfig(seed=SEED, relation_length=0)).extend(500)
    elapsed = time.perf_counter() - t0
    same = [g.as_tuple() for g in fresh.generators] == [g.as_tuple() for g in gated.generators]
    diag = gated.diagnostics()[:500]
    max_dist = max(d for _, _, d, _ in diag)
    margin = min(x - n / 2 for n, _, _, x in diag)
    ok = len(diag) == 500 and max_dist <= 0.5 and margin >= 0 and same and elapsed < 30
    report("4", ok, f"500 steps, max |w_n v0 - v0| = {max_dist:.4f} <= 0.5, min x-sum - n/2 = {margin:.2f}, "
                    f"{len(gated.generators)} generators, build {elapsed:.1f}s")
    assert ok


def test_criterion_5_exponential_growth(gated):
    t0 = time.perf_counter()
    rep = growth_exponent(gated, 200)
    elapsed = time.perf_counter() - t0
    margin = float(np.min(rep.log2_derivative - rep.n / 2))
    ok = margin >= -1e-9 and rep.rate >= LN2 / 2 - 1e-9 and elapsed < 60
    report("5", ok, f"min log2 D - n/2 = {margin:.3f}, certified rate {rep.rate:.5f} >= {LN2 / 2:.5f}, {elapsed:.1f}s")
    assert ok


def test_criterion_6_ellipticity(gated):
    t0 = time.perf_counter()
    rank = len(gated.generators)
    words = [(i,) for i in range(1, rank + 1)]
    words += sample_words(np.random.default_rng([SEED, 1]), rank, 20, max_len=6)
    worst_slope, bound_ok = 0.0, True
    for letters in words:
        rep = periodic_exponent(gated.group.word(letters), 2000, grid=32, slope_tol=1e-3)
        bound_ok &= bool(np.all(rep.translation_norm <= rep.bound + 1e-6))
        worst_slope = max(worst_slope, abs(rep.slope))
    elapsed = time.perf_counter() - t0
    ok = bound_ok and worst_slope <= 1e-3 and elapsed < 300
    report("6", ok, f"{len(words)} words ({rank} single generators + 20 sampled), n <= 2000: "
                    f"translation bound held={bound_ok}, max |slope| {worst_slope:.2e}, {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def burnside_run():
    t0 = time.perf_counter()
    table = BallTable(radius=12)
    relations = all(is_trivial(w) for w in ("aa", "bb", "cc", "dd", "bcd"))
    orders, b200, b400 = {}, {}, {}
    for g in table.ball(4):
        orders[g] = element_order(g, 256)
        b200[g] = periodic_banach_exponent(g, 200, table)[0]
        b400[g] = periodic_banach_exponent(g, 400, table)[0]
    rate, witness = geodesic_ray_exponent(table, 12)
    return {
        "table": table, "relations": relations, "orders": orders, "b200": b200, "b400": b400,
        "rate": rate, "witness": witness, "elapsed": time.perf_counter() - t0,
    }


def test_criterion_7_banach_counterexample(burnside_run):
    r = burnside_run
    table = r["table"]
    torsion = all(k & (k - 1) == 0 and k <= 256 for k in r["orders"].values())
    ad4 = r["orders"]["ad"] == 4 and is_trivial("ad" * 4)
    decreasing = all(r["b400"][g] < r["b200"][g] or r["b200"][g] == 0 for g in r["b200"])
    ray = r["rate"] == math.log(2) and len(r["witness"]) == 12 and all(
        word_length(r["witness"][:k], table) == k for k in range(13))
    sizes = table.sizes[:13]
    growth = all(x < y for x, y in zip(sizes, sizes[1:]))
    ok = r["relations"] and torsion and ad4 and decreasing and ray and growth and r["elapsed"] < 300
    report("7", ok, f"relations, torsion ({len(r['orders'])} elements, max order {max(r['orders'].values())}), "
                    f"(ad)^4 = e, bounds decrease on doubling, ray {r['witness']} gives ln 2, "
                    f"|B(n)| = {sizes}, {r['elapsed']:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="|(abad)^8| = 32 and |(ab)^8| = 16 put the N=200 window max above 0.1; "
                                      "see the decisions ledger")
def test_criterion_7_periodic_threshold(burnside_run):
    b200 = burnside_run["b200"]
    worst = max(b200, key=b200.get)
    ok = b200[worst] < 0.1
    over = sorted(g for g, b in b200.items() if b >= 0.1)
    report("7 (periodic bound < 0.1 at N=200)", ok,
           f"max bound {b200[worst]:.4f} at g = {worst}; {len(over)} of {len(b200)} elements at or above 0.1")
    assert ok


def test_criterion_8_freeness(sequence):
    t0 = time.perf_counter()
    ok_rel = no_short_relation_check(sequence.generators, 8, 1e-6)
    elapsed = time.perf_counter() - t0
    ok = ok_rel and elapsed < 120
    report("8", ok, f"{len(sequence.generators)} generators, no relation of length <= 8 within 1e-6, {elapsed:.1f}s")
    assert ok


def _artifacts_equal(a, b):
    names = sorted(p.name for p in a.iterdir())
    if names != sorted(p.name for p in b.iterdir()):
        return False, names
    for name in names:
        if name == "manifest.json":
            ma, mb = (json.loads((d / name).read_text()) for d in (a, b))
            ma.pop("wall_time_s"), mb.pop("wall_time_s")
            if ma != mb:
                return False, name
        elif not filecmp.cmp(a / name, b / name, shallow=False):
            return False, name
    return True, names


def test_criterion_9_reproducibility(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": SEED, "relation_length": 0, "n_sequence": 500,
                               "burnside_word_len": 3, "burnside_n": 100}))
    runs = [("partial-sums", []), ("flows", []), ("build", []), ("growth", ["--n-growth", "100"]),
            ("burnside", ["--ball-radius", "8"])]
    results = []
    for sub, extra in runs:
        dirs = [tmp_path / f"{sub}_{k}" for k in range(2)]
        for d in dirs:
            assert main([sub, "--config", str(cfg), "--out", str(d), *extra]) == 0
        same, detail = _artifacts_equal(*dirs)
        results.append((sub, same, detail))
    ok = all(same for _, same, _ in results)
    report("9", ok, "byte-identical artifacts on repeat for " + ", ".join(
        f"{sub}={'yes' if same else 'NO'}" for sub, same, _ in results))
    assert ok
