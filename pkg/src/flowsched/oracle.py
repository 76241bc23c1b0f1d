"""Exhaustive reference solvers for small inputs.

Both oracles are deliberately naive and share no code with the flow engine
or the solvers they are used to check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from flowsched.flow import FlowNetwork
from flowsched.instance import Instance, Schedule

DEFAULT_JOB_CAP = 12
MAX_FLOW_NODES = 8
MAX_FLOW_ARC_CAPACITY = 3


class OracleRefusal(ValueError):
    """The input exceeds the size the oracle is willing to enumerate."""


@dataclass(frozen=True)
class OracleResult:
    opt_makespan: Fraction
    witness: Schedule


def brute_force_opt(instance: Instance, job_cap: int = DEFAULT_JOB_CAP) -> OracleResult:
    """Optimal makespan by branch and bound over all eligible assignments.

    Jobs are branched on in order of decreasing size (declaration order among
    equals), machines in declaration order.  Loads are tracked as integers in
    units of ``1 / denominator(epsilon)``.
    """
    if len(instance.jobs) > job_cap:
        raise OracleRefusal(f"{len(instance.jobs)} jobs exceed the oracle cap of {job_cap}")
    if not instance.jobs:
        return OracleResult(Fraction(0), Schedule({}))
    den = instance.epsilon.denominator
    unit = {True: den, False: instance.epsilon.numerator}
    order = sorted(instance.jobs, key=lambda j: 0 if j.is_big else 1)
    sizes = [unit[j.is_big] for j in order]
    choices = [[m for m in instance.machines if m in j.eligible] for j in order]
    loads = {m: 0 for m in instance.machines}
    current: list[str] = [""] * len(order)
    best = [None, None]  # (value, assignment)

    def branch(k: int, peak: int) -> None:
        if best[0] is not None and peak >= best[0]:
            return
        if k == len(order):
            best[0] = peak
            best[1] = list(current)
            return
        for m in choices[k]:
            loads[m] += sizes[k]
            current[k] = m
            branch(k + 1, max(peak, loads[m]))
            loads[m] -= sizes[k]

    branch(0, 0)
    if best[1] is None:
        raise OracleRefusal("instance has a job without eligible machines")
    witness = Schedule({j.id: m for j, m in zip(order, best[1])})
    return OracleResult(Fraction(best[0], den), witness)


def brute_force_max_flow(net: FlowNetwork) -> int:
    """Maximum flow value by enumerating integral arc flows.

    Unbounded arcs are capped at the total sink capacity, which no arc of an
    acyclic maximum flow can exceed.
    """
    if len(net.nodes) > MAX_FLOW_NODES:
        raise OracleRefusal(f"{len(net.nodes)} nodes exceed the oracle cap of {MAX_FLOW_NODES}")
    if any(a.capacity is not None and a.capacity > MAX_FLOW_ARC_CAPACITY for a in net.arcs):
        raise OracleRefusal("finite arc capacity above the oracle cap")
    bound = sum(net.sink_capacity.values())
    ub = [bound if a.capacity is None else min(a.capacity, bound) for a in net.arcs]
    n_arcs = len(net.arcs)

    # remaining out/in capacity per node after arc k has been decided
    rest_out = {v: [0] * (n_arcs + 1) for v in net.nodes}
    rest_in = {v: [0] * (n_arcs + 1) for v in net.nodes}
    for k in range(n_arcs - 1, -1, -1):
        for v in net.nodes:
            rest_out[v][k] = rest_out[v][k + 1]
            rest_in[v][k] = rest_in[v][k + 1]
        rest_out[net.arcs[k].tail][k] += ub[k]
        rest_in[net.arcs[k].head][k] += ub[k]

    bal = {v: 0 for v in net.nodes}

    def feasible(v, k: int) -> bool:
        # can the final balance of v still land in its allowed range?
        lo = bal[v] - rest_in[v][k]
        hi = bal[v] + rest_out[v][k]
        if v in net.sources:
            return hi >= 0
        if v in net.sinks:
            return lo <= 0 and hi >= -net.sink_capacity[v]
        return lo <= 0 <= hi

    best = 0

    def search(k: int) -> None:
        nonlocal best
        if k == n_arcs:
            value = sum(bal[v] for v in net.sources)
            best = max(best, value)
            return
        a = net.arcs[k]
        for f in range(ub[k] + 1):
            bal[a.tail] += f
            bal[a.head] -= f
            if feasible(a.tail, k + 1) and feasible(a.head, k + 1):
                search(k + 1)
            bal[a.tail] -= f
            bal[a.head] += f

    if all(feasible(v, 0) for v in net.nodes):
        search(0)
    return best
