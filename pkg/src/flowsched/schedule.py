"""Partial schedules and the two flow-driven relocation procedures.

Network nodes are tagged tuples: ``("m", machine_id)`` and ``("j", job_id)``.
Flows in the small-job network are counted in whole jobs; a sink may absorb
``floor(c / eps)`` jobs where ``c`` is its residual room.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from math import floor
from typing import Iterable, Mapping, Sequence

from flowsched.flow import (
    Arc,
    Flow,
    FlowNetwork,
    FlowPath,
    augment,
    decompose,
    flow_from_paths,
    max_flow,
    node_balance,
)
from flowsched.instance import Instance, Schedule
from flowsched.numerics import Params


class DomainError(ValueError):
    """A relocation procedure was called outside its precondition."""


def mnode(machine: str) -> tuple[str, str]:
    return ("m", machine)


def jnode(job: str) -> tuple[str, str]:
    return ("j", job)


class PartialSchedule:
    """Assignment of every big job and some small jobs, with cached loads.

    ``assignment[job]`` is a machine id or ``None`` (not yet decided).  The
    object is mutated only through :meth:`move`; relocation procedures work
    on a :meth:`copy`.
    """

    def __init__(self, instance: Instance, params: Params, tau: Fraction, assignment: Mapping[str, str | None]):
        self.instance = instance
        self.params = params
        self.tau = Fraction(tau)
        self.assignment: dict[str, str | None] = {j.id: assignment.get(j.id) for j in instance.jobs}
        self.loads: dict[str, Fraction] = {m: Fraction(0) for m in instance.machines}
        self.big_on: dict[str, str] = {}
        self.small_on: dict[str, set[str]] = {m: set() for m in instance.machines}
        for job_id, m in self.assignment.items():
            if m is not None:
                self._place(job_id, m)

    def copy(self) -> "PartialSchedule":
        new = PartialSchedule.__new__(PartialSchedule)
        new.instance = self.instance
        new.params = self.params
        new.tau = self.tau
        new.assignment = dict(self.assignment)
        new.loads = dict(self.loads)
        new.big_on = dict(self.big_on)
        new.small_on = {m: set(js) for m, js in self.small_on.items()}
        return new

    # thresholds ---------------------------------------------------------
    @property
    def cap(self) -> Fraction:
        """Load bound ``tau + R`` every machine must respect."""
        return self.tau + self.params.R

    def fits_small(self, machine: str) -> bool:
        """Whether one more small job fits on ``machine``."""
        return self.loads[machine] <= self.cap - self.params.epsilon

    def fits_big(self, machine: str) -> bool:
        """Whether a big job fits on ``machine``."""
        return self.loads[machine] <= self.cap - 1

    # bookkeeping --------------------------------------------------------
    def _place(self, job_id: str, machine: str) -> None:
        self.loads[machine] += self.instance.size(job_id)
        if self.instance.job(job_id).is_big:
            if machine in self.big_on:
                raise DomainError(f"machine {machine!r} would hold two big jobs")
            self.big_on[machine] = job_id
        else:
            self.small_on[machine].add(job_id)

    def _remove(self, job_id: str, machine: str) -> None:
        self.loads[machine] -= self.instance.size(job_id)
        if self.instance.job(job_id).is_big:
            del self.big_on[machine]
        else:
            self.small_on[machine].discard(job_id)

    def move(self, job_id: str, machine: str) -> None:
        if machine not in self.instance.job(job_id).eligible:
            raise DomainError(f"job {job_id!r} is not eligible on {machine!r}")
        old = self.assignment[job_id]
        if old is not None:
            self._remove(job_id, old)
        self.assignment[job_id] = machine
        self._place(job_id, machine)

    # views --------------------------------------------------------------
    def scheduled(self) -> frozenset[str]:
        return frozenset(j for j, m in self.assignment.items() if m is not None)

    def unscheduled_small(self) -> list[str]:
        return [j.id for j in self.instance.small_jobs if self.assignment[j.id] is None]

    def is_total(self) -> bool:
        return all(m is not None for m in self.assignment.values())

    def to_schedule(self) -> Schedule:
        if not self.is_total():
            raise DomainError("partial schedule still has undecided jobs")
        return Schedule(dict(self.assignment))

    def small_jobs_on(self, machine: str) -> list[str]:
        return sorted(self.small_on[machine], key=self.instance.job_rank)

    def violations(self) -> list[str]:
        """Partial-schedule conditions that fail, plus load-cache mismatches."""
        out: list[str] = []
        inst = self.instance
        recomputed = {m: Fraction(0) for m in inst.machines}
        big_count = {m: 0 for m in inst.machines}
        for job in inst.jobs:
            m = self.assignment[job.id]
            if m is None:
                if job.is_big:
                    out.append(f"big job {job.id!r} unassigned")
                continue
            if m not in job.eligible:
                out.append(f"job {job.id!r} on ineligible machine {m!r}")
            recomputed[m] += inst.size(job.id)
            big_count[m] += job.is_big
        for m in inst.machines:
            if recomputed[m] > self.cap:
                out.append(f"machine {m!r} load {recomputed[m]} exceeds tau+R={self.cap}")
            if big_count[m] > 1:
                out.append(f"machine {m!r} holds {big_count[m]} big jobs")
            if recomputed[m] != self.loads[m]:
                out.append(f"machine {m!r} cached load {self.loads[m]} != {recomputed[m]}")
        return out


def big_machines(s: PartialSchedule) -> frozenset[str]:
    return frozenset(s.big_on)


def small_machines(s: PartialSchedule) -> frozenset[str]:
    return frozenset(m for m in s.instance.machines if m not in s.big_on)


def small_reachable(s: PartialSchedule, seed: Iterable[str]) -> frozenset[str]:
    """Machines reachable from ``seed`` by hopping along small jobs.

    From a machine we may pick any small job it holds and move to any other
    machine that job is eligible on.  The seed itself is always included.
    """
    seen = set(seed)
    queue = deque(seen)
    inst = s.instance
    while queue:
        m = queue.popleft()
        for j in s.small_on[m]:
            for m2 in inst.job(j).eligible:
                if m2 not in seen:
                    seen.add(m2)
                    queue.append(m2)
    return frozenset(seen)


def build_big_network(s: PartialSchedule, S: Iterable[str], T: Iterable[str]) -> FlowNetwork:
    """Network over big-job assignments with sources ``S`` and unit sinks ``T``."""
    S, T = frozenset(S), frozenset(T)
    if not S <= s.big_on.keys():
        raise DomainError(f"sources must be big machines: {sorted(S - s.big_on.keys())}")
    if T & s.big_on.keys():
        raise DomainError(f"sinks must be small machines: {sorted(T & s.big_on.keys())}")
    inst = s.instance
    nodes = [mnode(m) for m in inst.machines]
    arcs: list[Arc] = []
    for m in inst.machines:
        if m in s.big_on:
            arcs.append(Arc(mnode(m), jnode(s.big_on[m]), 1))
    for job in inst.big_jobs:
        nodes.append(jnode(job.id))
        here = s.assignment[job.id]
        for m in inst.machines:
            if m in job.eligible and m != here:
                arcs.append(Arc(jnode(job.id), mnode(m), None))
    return FlowNetwork(
        nodes=tuple(nodes),
        arcs=tuple(arcs),
        sources=frozenset(mnode(m) for m in S),
        sinks=frozenset(mnode(m) for m in T),
        sink_capacity={mnode(m): 1 for m in T},
    )


def small_sink_capacity(s: PartialSchedule, machine: str) -> int:
    """Number of small jobs ``machine`` may absorb as a sink."""
    eps = s.params.epsilon
    room = s.cap - s.loads[machine]
    if machine in s.big_on:
        room += 1 - eps
    if room < 0:
        raise DomainError(f"machine {machine!r} is over the load bound")
    return floor(room / eps)


def build_small_network(s: PartialSchedule, S: Iterable[str], T: Iterable[str]) -> FlowNetwork:
    """Network over small-job assignments, in job units, from ``S`` to ``T``."""
    S, T = frozenset(S), frozenset(T)
    if S & s.big_on.keys():
        raise DomainError(f"sources must be small machines: {sorted(S & s.big_on.keys())}")
    if S & T:
        raise DomainError(f"sources and sinks overlap: {sorted(S & T)}")
    inst = s.instance
    nodes = [mnode(m) for m in inst.machines]
    arcs: list[Arc] = []
    placed: list[str] = []
    for m in inst.machines:
        for j in s.small_jobs_on(m):
            arcs.append(Arc(mnode(m), jnode(j), 1))
    for job in inst.small_jobs:
        here = s.assignment[job.id]
        if here is None:
            continue
        placed.append(job.id)
        for m in inst.machines:
            if m in job.eligible and m != here:
                arcs.append(Arc(jnode(job.id), mnode(m), None))
    nodes.extend(jnode(j) for j in placed)
    return FlowNetwork(
        nodes=tuple(nodes),
        arcs=tuple(arcs),
        sources=frozenset(mnode(m) for m in S),
        sinks=frozenset(mnode(m) for m in T),
        sink_capacity={mnode(m): small_sink_capacity(s, m) for m in T},
    )


def _path_moves(path: FlowPath) -> list[tuple[str, str, str]]:
    """``(job, from_machine, to_machine)`` triples along an alternating path."""
    nodes = path.nodes
    out = []
    for k in range(1, len(nodes) - 1, 2):
        (mk, src), (jk, job), (mk2, dst) = nodes[k - 1], nodes[k], nodes[k + 1]
        if mk != "m" or jk != "j" or mk2 != "m":
            raise DomainError(f"path {nodes} does not alternate machines and jobs")
        out.append((job, src, dst))
    if len(nodes) % 2 != 1:
        raise DomainError(f"path {nodes} does not end at a machine")
    return out


def big_update(s: PartialSchedule, paths: Sequence[FlowPath]) -> PartialSchedule:
    """Shift big jobs one step along each of the given vertex-disjoint paths."""
    seen_nodes: set = set()
    plans = []
    for p in paths:
        if seen_nodes & set(p.nodes):
            raise DomainError("big-update paths are not vertex disjoint")
        seen_nodes |= set(p.nodes)
        moves = _path_moves(p)
        src = p.nodes[0][1]
        sink = p.nodes[-1][1]
        if src not in s.big_on:
            raise DomainError(f"path source {src!r} is not a big machine")
        if sink in s.big_on:
            raise DomainError(f"path sink {sink!r} is not a small machine")
        if not s.fits_big(sink):
            raise DomainError(f"path sink {sink!r} has load {s.loads[sink]} > tau+R-1")
        for job, frm, to in moves:
            if s.big_on.get(frm) != job:
                raise DomainError(f"big job {job!r} is not on {frm!r}")
            if to not in s.instance.job(job).eligible or to == frm:
                raise DomainError(f"invalid move of {job!r} to {to!r}")
        plans.append(moves)
    new = s.copy()
    for moves in plans:
        # back to front, so no machine ever holds two big jobs
        for job, _, to in reversed(moves):
            new.move(job, to)
    return new


@dataclass(frozen=True)
class RelocationFlow:
    """A flow left in a relocation network, with its node tags."""

    network: FlowNetwork
    flow: Flow
    paths: tuple[FlowPath, ...]
    unit_value: Fraction
    tags: Mapping

    def sources_used(self) -> dict[str, int]:
        """Number of remaining paths per source machine."""
        out: dict[str, int] = {}
        for p in self.paths:
            out[p.source[1]] = out.get(p.source[1], 0) + 1
        return out


def _tags(net: FlowNetwork) -> dict:
    return {v: ("machine" if v[0] == "m" else "job", v[1]) for v in net.nodes}


def _rebind(net: FlowNetwork, paths: Iterable[FlowPath]) -> tuple[FlowPath, ...]:
    """Re-express node paths with arc indices of ``net``."""
    index = {(a.tail, a.head): k for k, a in enumerate(net.arcs)}
    out = []
    for p in paths:
        arcs = tuple(index[(u, v)] for u, v in zip(p.nodes, p.nodes[1:]))
        out.append(FlowPath(nodes=p.nodes, arcs=arcs))
    return tuple(out)


def _drain(s: PartialSchedule, paths: Iterable[FlowPath]) -> list[FlowPath]:
    """Apply, in order, every path whose sink still fits a small job; return the rest."""
    kept: list[FlowPath] = []
    for p in paths:
        if s.fits_small(p.sink[1]):
            for job, _, to in _path_moves(p):
                s.move(job, to)
        else:
            kept.append(p)
    return kept


def _reroute(net: FlowNetwork, x: Flow, targets: set) -> Flow | None:
    """Shift absorption of ``x`` from its current sinks to ``targets`` through the residual network.

    Supplies at the sources stay fixed.  Returns ``None`` if nothing can be
    shifted.
    """
    bal = node_balance(net, x.arc_flow)
    nodes = list(net.nodes)
    arcs: list[Arc] = []
    origin: list[tuple[int, int]] = []
    for k, (a, f) in enumerate(zip(net.arcs, x.arc_flow)):
        if a.capacity is None or f < a.capacity:
            arcs.append(Arc(a.tail, a.head, None if a.capacity is None else a.capacity - f))
            origin.append((k, 1))
        if f > 0:
            arcs.append(Arc(a.head, a.tail, f))
            origin.append((k, -1))
    starts = []
    for v in net.sinks:
        if v not in targets and bal[v] < 0:
            starts.append(("release", v))
            arcs.append(Arc(("release", v), v, -bal[v]))
            origin.append((-1, 0))
    if not starts:
        return None
    aux = FlowNetwork(
        nodes=tuple(nodes + sorted(starts)),
        arcs=tuple(arcs),
        sources=frozenset(starts),
        sinks=frozenset(targets),
        sink_capacity={v: net.sink_capacity[v] + bal[v] for v in targets},
    )
    y = max_flow(aux)
    if y.value == 0:
        return None
    arc_flow = list(x.arc_flow)
    for (k, sign), f in zip(origin, y.arc_flow):
        if k >= 0:
            arc_flow[k] += sign * f
    return Flow(arc_flow=tuple(arc_flow), value=x.value)


def small_update(s: PartialSchedule, S: Iterable[str], T: Iterable[str]) -> tuple[PartialSchedule, RelocationFlow]:
    """Relocate small jobs from ``S`` towards machines of ``T`` with room.

    A maximum flow is first routed into the sinks that can take another small
    job, then augmented over all of ``T``; every resulting path whose sink
    still has room is applied.  Applying a path can fill a sink and leave a
    kept path blocking a chain towards a machine with room, so the kept flow
    is then rerouted through its residual network, with source supplies
    fixed, and drained again until nothing moves.  Afterwards no small-job
    path leads from ``S`` to a machine of ``T`` with room.  Returns the new
    schedule and the flow formed by the paths that were not applied.
    """
    S, T = frozenset(S), frozenset(T)
    if S & s.big_on.keys():
        raise DomainError(f"sources must be small machines: {sorted(S & s.big_on.keys())}")
    if S & T:
        raise DomainError(f"sources and sinks overlap: {sorted(S & T)}")
    net = build_small_network(s, S, T)
    low = {mnode(m) for m in T if s.fits_small(m)}
    first = replace(net, sink_capacity={v: (c if v in low else 0) for v, c in net.sink_capacity.items()})
    x0 = max_flow(first)
    x = augment(net, x0) if x0.value < sum(net.sink_capacity.values()) else x0
    new = s.copy()
    kept = _drain(new, decompose(net, x).paths)
    net_after = build_small_network(new, S, T)
    kept_paths = _rebind(net_after, kept)
    while kept_paths and any(new.fits_small(m) for m in T):
        # a kept path may block a relocation chain that opened up during the
        # drain; reroute kept flow into sinks with room and drain again
        moved = _reroute(net_after, flow_from_paths(net_after, kept_paths), {mnode(m) for m in T if new.fits_small(m)})
        if moved is None:
            break
        kept = _drain(new, decompose(net_after, moved).paths)
        net_after = build_small_network(new, S, T)
        kept_paths = _rebind(net_after, kept)
    rel = RelocationFlow(
        network=net_after,
        flow=flow_from_paths(net_after, kept_paths),
        paths=kept_paths,
        unit_value=s.params.epsilon,
        tags=_tags(net_after),
    )
    return new, rel


def assign_via_path(s: PartialSchedule, j0: str) -> PartialSchedule | None:
    """Place the small job ``j0`` by shifting small jobs along a shortest path.

    Breadth-first search from ``j0`` through the small-job graph; among the
    machines with room at the smallest depth the first in declaration order
    is chosen.  Returns ``None`` when no machine with room is reachable.
    """
    inst = s.instance
    rank = inst.machine_rank
    parent: dict[str, tuple[str, str] | None] = {}
    frontier = sorted(inst.job(j0).eligible, key=rank)
    for m in frontier:
        parent[m] = None
    while frontier:
        hits = [m for m in frontier if s.fits_small(m)]
        if hits:
            target = min(hits, key=rank)
            break
        nxt: list[str] = []
        for m in frontier:
            for j in s.small_jobs_on(m):
                for m2 in sorted(inst.job(j).eligible, key=rank):
                    if m2 not in parent:
                        parent[m2] = (j, m)
                        nxt.append(m2)
        frontier = nxt
    else:
        return None
    new = s.copy()
    chain: list[tuple[str, str]] = []
    m = target
    while parent[m] is not None:
        j, prev = parent[m]
        chain.append((j, m))
        m = prev
    for j, to in chain:
        new.move(j, to)
    new.move(j0, m)
    return new
