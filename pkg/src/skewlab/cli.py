"""Command-line driver: ``skewlab <subcommand> --seed N --out DIR``.

Every subcommand writes its artifacts plus ``manifest.json`` into ``--out``.
Exit status is 0 when every asserted invariant holds, 1 on the first breach
(named on stderr) and 2 when the configuration does not validate.

Random streams, all numpy PCG64:
  default_rng(seed)        generator construction
  default_rng([seed, 1])   random words for the ellipticity sweep
  default_rng([seed, 2])   partial-sum trials
  default_rng([seed, 3])   closed-form gate words and points
  default_rng([seed, 4])   flow group-law and commutation samples
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .burnside import (
    BallTable,
    element_order,
    geodesic_ray_exponent,
    is_trivial,
    periodic_banach_exponent,
    power_lengths,
)
from .circle_flows import LN2, FlowSystem
from .exponents import (
    closed_form_gate,
    growth_exponent,
    periodic_exponent,
    sample_words,
)
from .recurrence_builder import BuilderConfig, ConstructionError, RecurrentSequence
from .rotor import (
    eigen_angle,
    partial_sum,
    partial_sum_bound,
    partial_sum_closed_form,
    random_unit_quaternion,
)

SUBCOMMANDS = ("partial-sums", "flows", "build", "growth", "elliptic", "dichotomy", "burnside")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int | None = None
    v0: tuple = (1.0, 0.0, 0.0, 0.0)
    delta: float = 0.5
    epsilon: float = 0.03
    theta_h: float = 0.1
    eta: float | None = None
    relation_length: int = 8
    relation_tol: float = 1e-6
    n_sequence: int = 500
    n_growth: int = 200
    n_periodic: int = 2000
    word_sample: int = 20
    grid: int = 32
    slope_tol: float = 1e-3
    partial_trials: int = 200
    partial_n: int = 1000
    min_angle: float = 0.05
    gate_tol: float = 1e-6
    ball_radius: int = 12
    burnside_word_len: int = 4
    burnside_n: int = 200
    burnside_order_cap: int = 256
    burnside_threshold: float = 0.1

    def validate(self):
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or \"seed\" in the config file)")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("n_sequence", "n_growth", "n_periodic", "grid", "partial_trials", "partial_n",
                     "ball_radius", "burnside_word_len", "burnside_n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.word_sample < 0:
            raise ConfigError("word_sample must be >= 0")
        for name in ("relation_tol", "slope_tol", "min_angle", "gate_tol", "burnside_threshold"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        cap = self.burnside_order_cap
        if cap < 1 or cap & (cap - 1):
            raise ConfigError("burnside_order_cap must be a power of 2")
        try:
            self.builder()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def builder(self) -> BuilderConfig:
        return BuilderConfig(
            v0=tuple(self.v0), delta=self.delta, epsilon=self.epsilon, theta_h=self.theta_h,
            eta=self.eta, seed=self.seed if self.seed is not None else 0,
            relation_length=self.relation_length, relation_tol=self.relation_tol,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["v0"] = list(self.v0)
        return d


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# -- output helpers --------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow(["" if x is None else repr(float(x)) if isinstance(x, (float, np.floating)) else x
                          for x in row])


class Run:
    """Collects checks and artifacts for one subcommand."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.checks: list[tuple[str, bool]] = []
        self.artifacts: list[str] = []

    def check(self, name: str, ok) -> bool:
        ok = bool(ok)
        self.checks.append((name, ok))
        return ok

    def write_json(self, name: str, obj) -> None:
        write_json(self.out / name, obj)
        self.artifacts.append(name)

    def write_csv(self, name: str, header, rows) -> None:
        write_csv(self.out / name, header, rows)
        self.artifacts.append(name)

    def first_failure(self) -> str | None:
        return next((name for name, ok in self.checks if not ok), None)


# -- subcommands -------------------------------------------------------------


def run_partial_sums(run: Run) -> dict:
    cfg = run.cfg
    rng = np.random.default_rng([cfg.seed, 2])
    rows = []
    worst_excess, worst_closed = -np.inf, 0.0
    while len(rows) < cfg.partial_trials:
        q = random_unit_quaternion(rng)
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        if eigen_angle(q) < cfg.min_angle:
            continue
        bound = partial_sum_bound(q)
        qm = q.matrix()
        acc, term, top, closed_err = np.zeros(4), v.copy(), 0.0, 0.0
        for n in range(1, cfg.partial_n + 1):
            acc += term
            term = qm @ term
            top = max(top, float(np.linalg.norm(acc)))
            if n % 50 == 0 or n < 10:
                closed_err = max(closed_err, float(np.abs(partial_sum_closed_form(q, v, n) - acc).max()))
        closed_err = max(closed_err, float(np.abs(partial_sum(q, v, cfg.partial_n) - acc).max()))
        rows.append((len(rows), eigen_angle(q), top, bound, closed_err))
        worst_excess = max(worst_excess, top - bound)
        worst_closed = max(worst_closed, closed_err)
    run.write_csv("partial_sums.csv", ["trial", "eigen_angle", "max_norm", "bound", "closed_form_error"], rows)
    run.check("partial sums within 2/|q-1|", worst_excess <= 1e-8)
    run.check("iterated sums match closed form", worst_closed <= 1e-9)
    return {"trials": len(rows), "max_excess_over_bound": worst_excess, "max_closed_form_error": worst_closed}


def run_flows(run: Run) -> dict:
    flows = FlowSystem()
    p1 = flows.spec(1).center
    closed = flows.flow_derivative(1, 1.0, p1)
    ode = flows.flow_derivative(1, 1.0, p1, force_ode=True)
    rng = np.random.default_rng([run.cfg.seed, 4])
    group_err = 0.0
    for _ in range(20):
        i = int(rng.integers(1, len(flows.specs) + 1))
        t, u = rng.uniform(-10, 10, size=2)
        a, b = flows.spec(i).arc
        s = rng.uniform(a, b)
        group_err = max(group_err, abs(flows.flow(i, t, flows.flow(i, u, s)) - flows.flow(i, t + u, s)))
    comm_err = 0.0
    for _ in range(20):
        i, j = rng.choice(np.arange(1, len(flows.specs) + 1), size=2, replace=False)
        t, u = rng.uniform(-10, 10, size=2)
        s = rng.random()
        lhs = flows.flow(int(i), t, flows.flow(int(j), u, s))
        rhs = flows.flow(int(j), u, flows.flow(int(i), t, s))
        comm_err = max(comm_err, abs(lhs - rhs))
    summary = {
        "derivative_at_p1_closed": closed,
        "derivative_at_p1_ode": ode,
        "group_law_error": group_err,
        "commutation_error": comm_err,
        "sup_field_prime": flows.sup_field_prime(),
        "flows": flows.to_dict(),
    }
    run.write_json("flows.json", summary)
    run.check("flow derivative at p1 is 2 (closed form)", closed == 2.0)
    run.check("flow derivative at p1 is 2 (ODE)", abs(ode - 2.0) <= 1e-6)
    run.check("flow group law", group_err <= 1e-8)
    run.check("flows commute", comm_err <= 1e-12)
    return summary


def _generators_payload(seq: RecurrentSequence) -> dict:
    return {
        "generators": [list(g.as_tuple()) for g in seq.generators],
        "drift_index": seq.drift_index,
        "relation_retries": seq.retries,
        "config": seq.config.to_dict(),
    }


def _build(run: Run, with_gate: bool = True) -> tuple[RecurrentSequence, dict]:
    cfg = run.cfg
    seq = RecurrentSequence.build(cfg.builder())
    run.write_json("generators.json", _generators_payload(seq))
    summary = {"generators": len(seq.generators), "relation_retries": seq.retries,
               "relation_length_checked": cfg.relation_length}
    if with_gate:
        gate = closed_form_gate(seq.group, np.random.default_rng([cfg.seed, 3]))
        summary["closed_form_gate"] = gate
        if not run.check("closed form agrees with direct iteration", gate["max_error"] <= cfg.gate_tol):
            return seq, summary
    seq.extend(max(cfg.n_sequence, cfg.n_growth))
    diag = seq.diagnostics()[: cfg.n_sequence]
    run.write_csv("sequence.csv", ["n", "letter", "distance_to_v0", "running_x_sum"], diag)
    dist = max(d for _, _, d, _ in diag)
    margin = min(x - n / 2 for n, _, _, x in diag)
    summary.update({"steps": len(diag), "max_distance": dist, "min_x_sum_margin": margin})
    run.check("every prefix stays within delta of v0", dist <= cfg.delta)
    run.check("running x-sum at least n/2", margin >= 0)
    return seq, summary


def run_build(run: Run) -> dict:
    return _build(run)[1]


def _growth(run: Run, seq: RecurrentSequence) -> dict:
    rep = growth_exponent(seq, run.cfg.n_growth)
    run.write_csv("growth.csv", ["n", "log2_fiber_derivative", "translation_norm", "bound"], rep.rows())
    run.check("log2 derivative of W_n at least n/2", bool(np.all(rep.log2_derivative - rep.n / 2 >= -1e-9)))
    run.check("certified growth rate at least ln2/2", rep.rate >= LN2 / 2 - 1e-9)
    return rep.summary()


def run_growth(run: Run) -> dict:
    seq, summary = _build(run)
    if run.first_failure():
        return summary
    summary["growth"] = _growth(run, seq)
    return summary


def _sweep_words(cfg: RunConfig, rank: int) -> list[tuple[int, ...]]:
    words = [(i,) for i in range(1, rank + 1)]
    return words + sample_words(np.random.default_rng([cfg.seed, 1]), rank, cfg.word_sample)


def _elliptic(run: Run, seq: RecurrentSequence) -> dict:
    cfg = run.cfg
    reports, seen = [], set()
    for letters in _sweep_words(cfg, len(seq.generators)):
        w = seq.group.word(letters)
        rep = periodic_exponent(w, cfg.n_periodic, grid=cfg.grid, slope_tol=cfg.slope_tol)
        name = f"elliptic_{w}.csv"
        if name not in seen:
            seen.add(name)
            run.write_csv(name, ["n", "log2_fiber_derivative", "translation_norm", "bound"], rep.rows())
        reports.append(rep)
    run.check("translation sums within 2l/|w-1|", all(r.extra["bound_held"] for r in reports))
    run.check("periodic log-derivative slopes near 0", all(abs(r.slope) <= cfg.slope_tol for r in reports))
    return {
        "count": len(reports),
        "all_elliptic": all(r.verdict == "elliptic" for r in reports),
        "max_abs_slope": max(abs(r.slope) for r in reports),
        "words": [r.summary() for r in reports],
    }


def run_elliptic(run: Run) -> dict:
    seq, summary = _build(run)
    if run.first_failure():
        return summary
    summary["elliptic"] = _elliptic(run, seq)
    return summary


def run_dichotomy(run: Run) -> dict:
    seq, summary = _build(run)
    if run.first_failure():
        return summary
    summary["elliptic"] = _elliptic(run, seq)
    summary["growth"] = _growth(run, seq)
    summary["dichotomy_holds"] = not run.first_failure()
    return summary


def run_burnside(run: Run) -> dict:
    cfg = run.cfg
    table = BallTable(radius=cfg.ball_radius)
    relations = {w: is_trivial(w) for w in ("aa", "bb", "cc", "dd", "bcd", "cbd", "bdc", "dbc", "cdb", "dcb")}
    run.check("generator relations", all(relations.values()))
    elements = table.ball(cfg.burnside_word_len)
    orders, periodic = [], []
    for g in elements:
        order = element_order(g, cfg.burnside_order_cap)
        lengths = power_lengths(g, table, order)
        b1, _ = periodic_banach_exponent(g, cfg.burnside_n, table)
        b2, _ = periodic_banach_exponent(g, 2 * cfg.burnside_n, table)
        orders.append((g or "e", len(g), order, max(lengths)))
        periodic.append((g or "e", b1, b2))
    run.write_csv("burnside_orders.csv", ["element", "word_length", "order", "max_power_length"], orders)
    run.write_csv("burnside_periodic.csv", ["element", f"bound_N{cfg.burnside_n}", f"bound_N{2 * cfg.burnside_n}"],
                  periodic)
    rate, witness = geodesic_ray_exponent(table, cfg.ball_radius)
    sizes = table.sizes[: cfg.ball_radius + 1]
    run.write_csv("burnside_balls.csv", ["n", "ball_size"], list(enumerate(sizes)))
    worst = max(b for _, b, _ in periodic)
    worst_doubled = max(b for _, _, b in periodic)
    decreasing = all(b2 < b1 or b1 == 0.0 for _, b1, b2 in periodic)
    run.check("orders are powers of 2 within the cap",
              all(o & (o - 1) == 0 and o <= cfg.burnside_order_cap for _, _, o, _ in orders))
    run.check("periodic bounds decrease when N doubles", decreasing)
    run.check("ball sizes strictly increase", all(x < y for x, y in zip(sizes, sizes[1:])))
    run.check("geodesic ray exponent is ln 2", rate == LN2 and len(witness) == cfg.ball_radius)
    run.check("periodic exponents below the ray exponent", worst < rate)
    return {
        "group": "first Grigorchuk group <a,b,c,d>",
        "relations": relations,
        "ball_sizes": sizes,
        "max_order": max(o for _, _, o, _ in orders),
        "max_periodic_bound": worst,
        "max_periodic_bound_doubled": worst_doubled,
        "threshold": cfg.burnside_threshold,
        "threshold_met": worst < cfg.burnside_threshold,
        "ray_exponent": rate,
        "ray_witness": witness,
        "dichotomy_holds": worst < rate and rate == LN2,
    }


RUNNERS = {
    "partial-sums": run_partial_sums,
    "flows": run_flows,
    "build": run_build,
    "growth": run_growth,
    "elliptic": run_elliptic,
    "dichotomy": run_dichotomy,
    "burnside": run_burnside,
}


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "artifact": pkg}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewlab", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--seed", type=int, help="RNG seed (required; the reference runs use 42)")
    parser.add_argument("--out", default="out", help="artifact directory (default: out)")
    parser.add_argument("--n-growth", type=int, dest="n_growth")
    parser.add_argument("--n-periodic", type=int, dest="n_periodic")
    parser.add_argument("--delta", type=float)
    parser.add_argument("--ball-radius", type=int, dest="ball_radius")
    return parser


def run(subcommand: str, cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    job = Run(cfg, out)
    try:
        summary = RUNNERS[subcommand](job)
    except (ConstructionError, RuntimeError, ArithmeticError) as exc:
        job.check(f"{type(exc).__name__}: {exc}", False)
        summary = {}
    summary = {"subcommand": subcommand, "checks": dict(job.checks), **summary}
    job.write_json("summary.json", summary)
    manifest = {
        "subcommand": subcommand,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "artifacts": sorted(job.artifacts + ["manifest.json"]),
        "wall_time_s": time.perf_counter() - started,
    }
    write_json(out / "manifest.json", manifest)
    failure = job.first_failure()
    if failure:
        print(f"invariant failed: {failure}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "n_growth", "n_periodic", "delta", "ball_radius")}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    code = run(args.subcommand, cfg, Path(args.out))
    print(f"{args.subcommand}: {'ok' if code == 0 else 'FAILED'} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
