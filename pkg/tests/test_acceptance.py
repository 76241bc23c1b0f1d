"""Acceptance checks; each test records one ``criterion N: PASS/FAIL`` line."""

import json
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction

from corpus import ACCEPTANCE_LINES, DEEP, EPSILONS, chain_instance, oracle_corpus, trap_instance
from netgen import random_network
from flowsched.flow import cut_capacity, max_flow, min_cut
from flowsched.harness.generate import GeneratorConfig, generate
from flowsched.harness.io import save_instance
from flowsched.instance import check_schedule, makespan, tau_candidates
from flowsched.numerics import make_params, verify_params
from flowsched.oracle import brute_force_max_flow
from flowsched.search import SearchStats, TauTooSmall
from flowsched.solvers import binary_search_solve, combined_solve, matching_solve, solve_with_tau

ZETA = Fraction(1, 10)


@contextmanager
def criterion(n: int, title: str):
    """Record PASS with the detail set by the body, or FAIL with the error."""
    detail: list[str] = []
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"criterion {n}: FAIL {title}: {type(exc).__name__}: {exc}"[:400])
        raise
    ACCEPTANCE_LINES.append(f"criterion {n}: PASS {title}" + (f" ({detail[0]})" if detail else ""))


def test_criterion_01_ratio_bound():
    with criterion(1, "binary_search_solve <= (1+R)*OPT") as detail:
        cases = oracle_corpus()
        assert len(cases) >= 500
        assert all(len(c.instance.machines) <= 4 and len(c.instance.jobs) <= 10 for c in cases)
        assert {c.instance.epsilon for c in cases} <= set(EPSILONS)
        start = time.perf_counter()
        params = {eps: make_params(eps, ZETA) for eps in EPSILONS}
        bad, solved = [], 0
        for c in cases:
            r = binary_search_solve(c.instance, params[c.instance.epsilon])
            if r is None:
                continue
            solved += 1
            check_schedule(c.instance, r.schedule)
            if not r.makespan <= params[c.instance.epsilon].ratio * c.opt:
                bad.append((c.config, r.makespan, c.opt))
        elapsed = time.perf_counter() - start
        assert not bad, bad[:3]
        assert elapsed < 60, f"{elapsed:.1f}s"
        detail.append(f"{len(cases)} instances, {solved} solved, {elapsed:.1f}s")


def test_criterion_02_per_tau_success():
    with criterion(2, "solve_with_tau succeeds at the smallest candidate >= OPT") as detail:
        failures, runs = [], 0
        for c in oracle_corpus():
            if c.opt >= 2:
                continue
            tau = next(t for t in tau_candidates(c.instance) if t >= c.opt)
            p = make_params(c.instance.epsilon, ZETA)
            runs += 1
            try:
                sched = solve_with_tau(c.instance, tau, p)
            except TauTooSmall as exc:
                failures.append((c.config, tau, exc.reason))
                continue
            if not makespan(c.instance, sched) <= tau + p.R:
                failures.append((c.config, tau, "makespan above tau + R"))
        assert not failures, failures[:3]
        assert runs > 200
        detail.append(f"{runs} instances")


def test_criterion_03_matching_bound():
    with criterion(3, "matching <= (2-eps)*OPT, exact without big jobs") as detail:
        bad, with_big, all_small = [], 0, 0
        for c in oracle_corpus():
            r = matching_solve(c.instance)
            check_schedule(c.instance, r.schedule)
            if c.instance.big_jobs:
                with_big += 1
                if not r.makespan <= (2 - c.instance.epsilon) * c.opt:
                    bad.append((c.config, r.makespan, c.opt))
            else:
                all_small += 1
                if r.makespan != c.opt:
                    bad.append((c.config, r.makespan, c.opt))
        assert not bad, bad[:3]
        detail.append(f"{with_big} with big jobs, {all_small} all-small")


def test_criterion_04_combined_bound():
    with criterion(4, "combined <= (17/9+zeta)*OPT and the eps=1/9 analytic check") as detail:
        bound = Fraction(17, 9) + ZETA
        bad = []
        cases = oracle_corpus()
        for c in cases:
            r = combined_solve(c.instance, ZETA)
            check_schedule(c.instance, r.schedule)
            if not r.makespan <= bound * c.opt:
                bad.append((c.config, r.makespan, c.opt))
        assert not bad, bad[:3]
        at_ninth = make_params(Fraction(1, 9), ZETA).ratio
        assert abs(at_ninth - bound) <= ZETA / 2
        grid = [Fraction(k, 900) for k in range(1, 900)]
        peak = max(min(make_params(e, ZETA).ratio, 2 - e) for e in grid)
        assert Fraction(17, 9) <= peak <= bound
        detail.append(f"{len(cases)} instances; 1+R(1/9)={float(at_ninth):.6f}; grid max {float(peak):.6f}")


def test_criterion_05_limit_constant():
    with criterion(5, "1+R(1e-6, 1e-4) near 1+sqrt(3)/2") as detail:
        value = make_params(Fraction(1, 10**6), Fraction(1, 10**4)).ratio
        lo = Fraction("1.8660254")
        assert lo <= value <= lo + Fraction(2, 10**4)
        detail.append(f"{float(value):.7f}")


def test_criterion_06_parameter_positivity():
    with criterion(6, "verify_params on the 99 x 3 grid") as detail:
        start = time.perf_counter()
        bad = [
            (k, z)
            for k in range(1, 100)
            for z in (Fraction(1, 100), Fraction(1, 10), Fraction(1))
            if not verify_params(make_params(Fraction(k, 100), z))
        ]
        elapsed = time.perf_counter() - start
        assert not bad, bad[:5]
        assert elapsed < 5, f"{elapsed:.2f}s"
        detail.append(f"{elapsed:.2f}s")


def test_criterion_07_flow_oracle():
    with criterion(7, "max_flow equals the enumeration oracle on 1000 networks") as detail:
        rng = random.Random(20261014)
        mismatches = 0
        for _ in range(1000):
            net = random_network(rng, max_nodes=8, max_cap=3)
            f = max_flow(net)
            if f.value != brute_force_max_flow(net) or cut_capacity(net, min_cut(net, f)) != f.value:
                mismatches += 1
        assert mismatches == 0
        detail.append("0 mismatches")


def _monitored(instance, tau, zeta, totals):
    stats = SearchStats()
    p = make_params(instance.epsilon, zeta)
    try:
        sched = solve_with_tau(instance, tau, p, check_invariants=True, stats=stats)
    except TauTooSmall as exc:
        totals["failed"].append((instance, tau, zeta, exc.reason, stats.violations[:2]))
    else:
        if not makespan(instance, sched) <= tau + p.R:
            totals["failed"].append((instance, tau, zeta, "makespan", []))
    totals["stats"].merge(stats)


def test_criterion_08_invariant_monitors():
    with criterion(8, "instrumented runs report no invariant violations") as detail:
        totals = {"failed": [], "stats": SearchStats()}
        for c in oracle_corpus():
            if c.opt >= 2:
                continue
            for tau in tau_candidates(c.instance):
                if tau >= c.opt:
                    for zeta in (ZETA, Fraction(1, 1000)):
                        _monitored(c.instance, tau, zeta, totals)
        rng = random.Random(8)
        for _ in range(300):
            eps = rng.choice(EPSILONS + (Fraction(1, 5),))
            _monitored(trap_instance(rng, eps, rng.randint(2, 14)), Fraction(1), Fraction(1, 1000), totals)
        for k in range(1, 7):
            _monitored(chain_instance(k), Fraction(1), Fraction(1, 1000), totals)
        _monitored(DEEP, Fraction(1), Fraction(1, 1000), totals)
        st = totals["stats"]
        assert not totals["failed"], totals["failed"][:2]
        assert st.violations == []
        assert st.monitor_checks >= 50 and st.max_depth >= 6
        detail.append(f"{st.monitor_checks} monitored rounds, {st.collapses} collapses, max depth {st.max_depth}")


SCALE_CONFIGS = [
    GeneratorConfig(family="uniform", machines=50, big=25, small=475, epsilon=Fraction(1, 3), density=0.08),
    GeneratorConfig(family="clustered", machines=50, big=40, small=460, epsilon=Fraction(1, 3), density=0.3, clusters=5),
    GeneratorConfig(family="tight", machines=50, big=30, small=470, epsilon=Fraction(1, 3), density=0.04),
    GeneratorConfig(family="uniform", machines=50, big=50, small=450, epsilon=Fraction(1, 3), density=0.05),
]


def test_criterion_09_scale():
    with criterion(9, "20 instances of 50 machines x 500 jobs") as detail:
        slowest = 0.0
        for k in range(20):
            base = SCALE_CONFIGS[k % len(SCALE_CONFIGS)]
            cfg = GeneratorConfig(**{**base.__dict__, "seed": 1000 + k})
            instance = generate(cfg)
            assert len(instance.machines) == 50 and len(instance.jobs) == 500
            start = time.perf_counter()
            r = combined_solve(instance, ZETA)
            elapsed = time.perf_counter() - start
            check_schedule(instance, r.schedule)
            assert r.makespan == makespan(instance, r.schedule)
            assert elapsed < 30, f"run {k} took {elapsed:.1f}s"
            slowest = max(slowest, elapsed)
        detail.append(f"slowest {slowest:.1f}s")


def test_criterion_10_determinism(tmp_path):
    with criterion(10, "identical inputs give byte-identical reports") as detail:
        path = tmp_path / "inst.json"
        save_instance(generate(GeneratorConfig(family="clustered", machines=6, big=3, small=14, seed=10)), path)

        def cli(*args):
            proc = subprocess.run([sys.executable, "-m", "flowsched", *args], capture_output=True, check=False)
            return proc.returncode, proc.stdout

        runs = [
            ("solve", "--instance", str(path), "--json", "--seed", "5", "--check-invariants"),
            ("solve", "--instance", str(path), "--json", "--method", "local-search", "--zeta", "1/1000"),
            ("solve", "--instance", str(path), "--instance", str(path), "--jobs", "2", "--json"),
            ("gen", "--family", "tight", "--seed", "42"),
        ]
        for args in runs:
            first, second = cli(*args), cli(*args)
            assert first == second and first[0] in (0, 2) and first[1]
        json.loads(cli(*runs[0])[1])
        detail.append(f"{len(runs)} command lines")
