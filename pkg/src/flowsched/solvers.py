"""End-to-end solvers built on the local search and on slot matching."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from flowsched.flow import Arc, Flow, FlowNetwork, augment, count_flow_calls, flow_violations
from flowsched.instance import Instance, Schedule, makespan, tau_candidates
from flowsched.numerics import Params, make_params
from flowsched.schedule import DomainError, PartialSchedule
from flowsched.search import SearchStats, TauTooSmall, local_search

LOCAL_SEARCH = "local-search"
MATCHING = "matching"
COMBINED = "combined"


class InfeasibleInstanceError(ValueError):
    """No schedule exists, which only happens for structurally invalid instances."""


@dataclass
class SolveReport:
    schedule: Schedule
    makespan: Fraction
    tau_used: Fraction | None
    method: str
    stats: dict[str, Any] = field(default_factory=dict)


def initial_big_assignment(instance: Instance, tau: Fraction, params: Params) -> PartialSchedule:
    """Place every big job on its own eligible machine, small jobs left open.

    Raises :class:`TauTooSmall` when no such placement exists.
    """
    tau = Fraction(tau)
    if not 1 <= tau < 2:
        raise DomainError(f"tau must lie in [1, 2), got {tau}")
    bigs = instance.big_jobs
    src = ("src",)
    nodes = [src] + [("j", j.id) for j in bigs] + [("m", m) for m in instance.machines]
    arcs = [Arc(src, ("j", j.id), 1) for j in bigs]
    for j in bigs:
        for m in instance.machines:
            if m in j.eligible:
                arcs.append(Arc(("j", j.id), ("m", m), 1))
    net = FlowNetwork(
        nodes=tuple(nodes),
        arcs=tuple(arcs),
        sources=frozenset([src]),
        sinks=frozenset(("m", m) for m in instance.machines),
        sink_capacity={("m", m): 1 for m in instance.machines},
    )
    flow = augment(net, _greedy_flow(net, len(bigs)))
    if flow.value < len(bigs):
        raise TauTooSmall(f"only {flow.value} of {len(bigs)} big jobs can be placed on distinct machines")
    assignment: dict[str, str | None] = {}
    for a, f in zip(net.arcs, flow.arc_flow):
        if f and a.tail[0] == "j":
            assignment[a.tail[1]] = a.head[1]
    return PartialSchedule(instance, params, tau, assignment)


def _greedy_flow(net: FlowNetwork, jobs: int) -> Flow:
    """Feasible warm-start flow for a one-source job/slot network.

    Every job (an arc out of the source) takes the first route with room,
    possibly through one intermediate node; the result is handed to
    :func:`augment`, so its quality only affects speed.
    """
    flow = [0] * len(net.arcs)
    out: dict = {}
    for k, a in enumerate(net.arcs):
        out.setdefault(a.tail, []).append(k)
    load = {v: 0 for v in net.sinks}
    used = [0] * len(net.arcs)
    value = 0

    def room(k: int) -> bool:
        cap = net.arcs[k].capacity
        return cap is None or used[k] < cap

    for k0 in out.get(next(iter(net.sources)), []):
        job = net.arcs[k0].head
        route = None
        for k1 in out.get(job, []):
            if not room(k1):
                continue
            v = net.arcs[k1].head
            if v in load and load[v] < net.sink_capacity[v]:
                route = (k0, k1)
                break
            for k2 in out.get(v, []):
                w = net.arcs[k2].head
                if room(k2) and w in load and load[w] < net.sink_capacity[w]:
                    route = (k0, k1, k2)
                    break
            if route:
                break
        if route is None:
            continue
        for k in route:
            used[k] += 1
            flow[k] += 1
        load[net.arcs[route[-1]].head] += 1
        value += 1
    result = Flow(arc_flow=tuple(flow), value=value)
    assert not flow_violations(net, result)
    return result


def solve_with_tau(
    instance: Instance,
    tau: Fraction,
    params: Params,
    check_invariants: bool = False,
    stats: SearchStats | None = None,
) -> Schedule:
    """Schedule all jobs with makespan at most ``tau + R`` or raise :class:`TauTooSmall`."""
    tau = Fraction(tau)
    s = initial_big_assignment(instance, tau, params)
    for job in instance.small_jobs:
        s = local_search(tau, s, job.id, check_invariants=check_invariants, stats=stats)
        if check_invariants:
            problems = s.violations()
            if problems:
                if stats is not None:
                    stats.violations.extend(problems)
                raise TauTooSmall("invariant violated: " + problems[0])
    return s.to_schedule()


def _stats_dict(search: SearchStats, flow_calls: int, probes: list) -> dict[str, Any]:
    return {
        "main_loop_iterations": search.main_loop_iterations,
        "layers_built": search.layers_built,
        "collapses": search.collapses,
        "monitor_checks": search.monitor_checks,
        "max_depth": search.max_depth,
        "violations": list(search.violations),
        "flow_calls": flow_calls,
        "tau_probes": [[str(t), ok] for t, ok in probes],
    }


def binary_search_solve(
    instance: Instance,
    params: Params,
    check_invariants: bool = False,
    timing: bool = False,
) -> SolveReport | None:
    """Smallest verified guess ``tau`` in ``[1, 2)`` at which the local search succeeds.

    Returns ``None`` when every candidate fails.  Instances without big jobs
    are solved exactly by slot matching instead.
    """
    start = time.perf_counter()
    if not instance.big_jobs:
        report = matching_solve(instance)
        report.method = LOCAL_SEARCH
        report.stats["exact_all_small"] = True
        if timing:
            report.stats["wall_time"] = time.perf_counter() - start
        return report
    candidates = tau_candidates(instance)
    search = SearchStats()
    probes: list[tuple[Fraction, bool]] = []
    tried: dict[Fraction, Schedule | None] = {}

    def attempt(tau: Fraction) -> Schedule | None:
        run = SearchStats()
        try:
            sched = solve_with_tau(instance, tau, params, check_invariants, run)
        except TauTooSmall:
            sched = None
        search.merge(run)
        probes.append((tau, sched is not None))
        tried[tau] = sched
        return sched

    with count_flow_calls() as calls:
        lo, hi = 0, len(candidates) - 1
        best: int | None = None
        while lo <= hi:
            mid = (lo + hi) // 2
            if attempt(candidates[mid]) is not None:
                best, hi = mid, mid - 1
            else:
                lo = mid + 1
        if best is None:
            # success need not be monotone in tau, so try what bisection skipped
            for k, tau in enumerate(candidates):
                if tau not in tried and attempt(tau) is not None:
                    best = k
                    break
    if best is None:
        return None
    tau = candidates[best]
    sched = tried[tau]
    stats = _stats_dict(search, calls[0], probes)
    if timing:
        stats["wall_time"] = time.perf_counter() - start
    return SolveReport(sched, makespan(instance, sched), tau, LOCAL_SEARCH, stats)


def _slot_network(instance: Instance, big_slots: int, small_slots: int) -> FlowNetwork:
    src = ("src",)
    nodes = [src] + [("j", j.id) for j in instance.jobs]
    for m in instance.machines:
        nodes += [("b", m), ("m", m)]
    arcs = [Arc(src, ("j", j.id), 1) for j in instance.jobs]
    for j in instance.jobs:
        tag = "b" if j.is_big else "m"
        for m in instance.machines:
            if m in j.eligible:
                arcs.append(Arc(("j", j.id), (tag, m), None))
    for m in instance.machines:
        arcs.append(Arc(("b", m), ("m", m), big_slots))
    return FlowNetwork(
        nodes=tuple(nodes),
        arcs=tuple(arcs),
        sources=frozenset([src]),
        sinks=frozenset(("m", m) for m in instance.machines),
        sink_capacity={("m", m): big_slots + small_slots for m in instance.machines},
    )


def _slot_schedule(instance: Instance, big_slots: int, small_slots: int) -> Schedule | None:
    net = _slot_network(instance, big_slots, small_slots)
    flow = augment(net, _greedy_flow(net, len(instance.jobs)))
    if flow.value < len(instance.jobs):
        return None
    assignment = {}
    for a, f in zip(net.arcs, flow.arc_flow):
        if f and a.tail[0] == "j":
            assignment[a.tail[1]] = a.head[1]
    return Schedule(assignment)


def matching_solve(instance: Instance, timing: bool = False) -> SolveReport:
    """Slot-matching baseline.

    Each machine gets ``b`` slots that accept any job and ``s`` slots for
    small jobs only, so its load is at most ``b + s*eps``.  For each ``b``
    the smallest feasible ``s`` is found by bisection and the pair with the
    smallest bound wins.  With ``b = 1`` this is the classic ``2 - eps``
    construction; larger ``b`` only matters when two big jobs must share a
    machine, and keeps the same guarantee.  Without big jobs ``b = 0`` and
    the result is optimal.
    """
    start = time.perf_counter()
    eps = instance.epsilon
    n_small = len(instance.small_jobs)
    n_big = len(instance.big_jobs)
    best: tuple[Fraction, int, int, Schedule] | None = None
    with count_flow_calls() as calls:
        b = 1 if n_big else 0
        while b <= max(n_big, 0) and (best is None or b < best[0]):
            found = _slot_schedule(instance, b, n_small)
            if found is None:
                if n_big == 0:
                    raise InfeasibleInstanceError("small jobs cannot be placed")
                b += 1
                continue
            lo, hi = 0, n_small
            while lo < hi:
                mid = (lo + hi) // 2
                sched = _slot_schedule(instance, b, mid)
                if sched is not None:
                    hi, found = mid, sched
                else:
                    lo = mid + 1
            bound = b + lo * eps
            if best is None or bound < best[0]:
                best = (bound, b, lo, found)
            if n_big == 0:
                break
            b += 1
    if best is None:
        raise InfeasibleInstanceError("jobs cannot be placed on eligible machines")
    bound, b, s, sched = best
    stats: dict[str, Any] = {"big_slots": b, "small_slots": s, "slot_bound": str(bound), "flow_calls": calls[0]}
    if timing:
        stats["wall_time"] = time.perf_counter() - start
    return SolveReport(sched, makespan(instance, sched), None, MATCHING, stats)


def combined_solve(
    instance: Instance,
    zeta: Fraction,
    check_invariants: bool = False,
    timing: bool = False,
) -> SolveReport:
    """The better of the local-search and matching schedules."""
    zeta = Fraction(zeta)
    if zeta <= 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    start = time.perf_counter()
    params = make_params(instance.epsilon, zeta)
    ls = binary_search_solve(instance, params, check_invariants=check_invariants)
    mt = matching_solve(instance)
    if ls is not None and ls.makespan <= mt.makespan:
        chosen, branch = ls, LOCAL_SEARCH
    else:
        chosen, branch = mt, MATCHING
    stats = {
        "branch": branch,
        "local_search_makespan": None if ls is None else str(ls.makespan),
        "matching_makespan": str(mt.makespan),
        "local_search": None if ls is None else ls.stats,
        "matching": mt.stats,
    }
    if timing:
        stats["wall_time"] = time.perf_counter() - start
    return SolveReport(chosen.schedule, chosen.makespan, chosen.tau_used, COMBINED, stats)
