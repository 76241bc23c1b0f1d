"""Deterministic integral max-flow with sink capacities.

Semantics used throughout the package:

* every source has unlimited supply; flow may also pass *through* a source;
* every sink absorbs at most ``sink_capacity[sink]`` units; flow may pass
  through a sink on its way to another sink;
* every other node conserves flow.

Capacities and flows are integers; ``None`` marks an unbounded arc.
Internally a super-source feeds every source and every sink drains into a
super-sink through an arc carrying its capacity.  Augmenting paths are found
by breadth-first search, scanning arcs in declaration order, so equal
networks always yield identical flows.
"""

from __future__ import annotations

from collections import deque
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

Node = Hashable


class FlowError(RuntimeError):
    """A flow precondition failed or the engine hit an impossible state."""


@dataclass(frozen=True)
class Arc:
    tail: Node
    head: Node
    capacity: int | None


@dataclass(frozen=True)
class FlowNetwork:
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    sources: frozenset
    sinks: frozenset
    sink_capacity: Mapping[Node, int]

    def __post_init__(self) -> None:
        declared = set(self.nodes)
        if len(declared) != len(self.nodes):
            raise ValueError("duplicate node in flow network")
        if self.sources & self.sinks:
            raise ValueError("sources and sinks overlap")
        if not (self.sources | self.sinks) <= declared:
            raise ValueError("terminal is not a declared node")
        if set(self.sink_capacity) != set(self.sinks):
            raise ValueError("sink capacities must be given exactly for the sinks")
        if any(c < 0 for c in self.sink_capacity.values()):
            raise ValueError("negative sink capacity")
        for a in self.arcs:
            if a.tail not in declared or a.head not in declared:
                raise ValueError(f"arc {a} has an undeclared endpoint")
            if a.capacity is not None and a.capacity < 0:
                raise ValueError(f"arc {a} has negative capacity")


@dataclass(frozen=True)
class Flow:
    arc_flow: tuple[int, ...]
    value: int


@dataclass(frozen=True)
class FlowPath:
    """One unit of flow from ``nodes[0]`` (a source) to ``nodes[-1]`` (a sink)."""

    nodes: tuple[Node, ...]
    arcs: tuple[int, ...]

    @property
    def source(self) -> Node:
        return self.nodes[0]

    @property
    def sink(self) -> Node:
        return self.nodes[-1]


@dataclass(frozen=True)
class PathDecomposition:
    paths: tuple[FlowPath, ...]


_flow_calls: ContextVar[list[int] | None] = ContextVar("flowsched_flow_calls", default=None)


@contextmanager
def count_flow_calls() -> Iterator[list[int]]:
    """Count ``max_flow``/``augment`` invocations made inside the block."""
    box = [0]
    token = _flow_calls.set(box)
    try:
        yield box
    finally:
        _flow_calls.reset(token)


def _tick() -> None:
    box = _flow_calls.get()
    if box is not None:
        box[0] += 1


def zero_flow(net: FlowNetwork) -> Flow:
    return Flow(arc_flow=(0,) * len(net.arcs), value=0)


def node_balance(net: FlowNetwork, arc_flow: Sequence[int]) -> dict[Node, int]:
    """Outflow minus inflow at every node."""
    bal = {v: 0 for v in net.nodes}
    for a, f in zip(net.arcs, arc_flow):
        bal[a.tail] += f
        bal[a.head] -= f
    return bal


def flow_violations(net: FlowNetwork, flow: Flow) -> list[str]:
    """Describe every way in which ``flow`` is infeasible for ``net``."""
    out: list[str] = []
    if len(flow.arc_flow) != len(net.arcs):
        return [f"flow has {len(flow.arc_flow)} arc values, network has {len(net.arcs)} arcs"]
    for k, (a, f) in enumerate(zip(net.arcs, flow.arc_flow)):
        if f < 0:
            out.append(f"arc {k} carries negative flow {f}")
        if a.capacity is not None and f > a.capacity:
            out.append(f"arc {k} flow {f} exceeds capacity {a.capacity}")
    bal = node_balance(net, flow.arc_flow)
    supplied = 0
    for v in net.nodes:
        b = bal[v]
        if v in net.sources:
            if b < 0:
                out.append(f"source {v!r} has net inflow {-b}")
            supplied += b
        elif v in net.sinks:
            if b > 0:
                out.append(f"sink {v!r} has net outflow {b}")
            elif -b > net.sink_capacity[v]:
                out.append(f"sink {v!r} absorbs {-b} > capacity {net.sink_capacity[v]}")
        elif b != 0:
            out.append(f"conservation violated at {v!r} (balance {b})")
    if supplied != flow.value:
        out.append(f"flow value {flow.value} differs from source supply {supplied}")
    return out


class _Residual:
    """Residual graph with a super-source ``n`` and a super-sink ``n + 1``."""

    def __init__(self, net: FlowNetwork, base: Flow | None):
        self.net = net
        self.index = {v: k for k, v in enumerate(net.nodes)}
        n = len(net.nodes)
        self.s, self.t = n, n + 1
        base_sum = sum(base.arc_flow) if base is not None else 0
        finite = sum(a.capacity for a in net.arcs if a.capacity is not None)
        self.inf = 1 + finite + sum(net.sink_capacity.values()) + base_sum
        self.to: list[int] = []
        self.cap: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(n + 2)]
        bal = node_balance(net, base.arc_flow) if base is not None else None

        for v in net.nodes:
            if v in net.sources:
                self._add(self.s, self.index[v], self.inf, bal[v] if bal else 0)
        for v in net.nodes:
            if v in net.sinks:
                self._add(self.index[v], self.t, net.sink_capacity[v], -bal[v] if bal else 0)
        self.arc_edge: list[int] = []
        for k, a in enumerate(net.arcs):
            cap = self.inf if a.capacity is None else a.capacity
            used = base.arc_flow[k] if base is not None else 0
            self.arc_edge.append(self._add(self.index[a.tail], self.index[a.head], cap, used))
        self.value = base.value if base is not None else 0

    def _add(self, u: int, v: int, cap: int, used: int) -> int:
        e = len(self.to)
        self.to.append(v)
        self.cap.append(cap - used)
        self.adj[u].append(e)
        self.to.append(u)
        self.cap.append(used)
        self.adj[v].append(e + 1)
        return e

    def reachable(self) -> list[int | None]:
        """Parent edge of every vertex reachable from the super-source (BFS)."""
        parent: list[int | None] = [None] * len(self.adj)
        seen = [False] * len(self.adj)
        seen[self.s] = True
        queue = deque([self.s])
        to, cap, adj, t = self.to, self.cap, self.adj, self.t
        while queue:
            u = queue.popleft()
            for e in adj[u]:
                if cap[e] > 0:
                    v = to[e]
                    if not seen[v]:
                        seen[v] = True
                        parent[v] = e
                        if v == t:
                            self.seen = seen
                            return parent
                        queue.append(v)
        self.seen = seen
        return parent

    def saturate(self) -> None:
        to, cap = self.to, self.cap
        while True:
            parent = self.reachable()
            if not self.seen[self.t]:
                return
            bottleneck = self.inf
            v = self.t
            while v != self.s:
                e = parent[v]
                bottleneck = min(bottleneck, cap[e])
                v = to[e ^ 1]
            if bottleneck >= self.inf:
                raise FlowError("unbounded flow detected")
            v = self.t
            while v != self.s:
                e = parent[v]
                cap[e] -= bottleneck
                cap[e ^ 1] += bottleneck
                v = to[e ^ 1]
            self.value += bottleneck

    def flow(self) -> Flow:
        return Flow(arc_flow=tuple(self.cap[e ^ 1] for e in self.arc_edge), value=self.value)


def max_flow(net: FlowNetwork) -> Flow:
    """Maximum integral flow, built from shortest augmenting paths."""
    _tick()
    res = _Residual(net, None)
    res.saturate()
    return res.flow()


def augment(net: FlowNetwork, base: Flow) -> Flow:
    """Extend the feasible flow ``base`` to a maximum flow by augmenting paths.

    Supplies at sources and absorption at sinks never decrease.
    """
    problems = flow_violations(net, base)
    if problems:
        raise FlowError("base flow infeasible: " + "; ".join(problems))
    _tick()
    res = _Residual(net, base)
    res.saturate()
    return res.flow()


def cut_capacity(net: FlowNetwork, side: Iterable[Node]) -> float:
    """Capacity of the cut separating ``side`` (plus the super-source) from the rest."""
    side = set(side)
    total: float = 0
    for a in net.arcs:
        if a.tail in side and a.head not in side:
            total += float("inf") if a.capacity is None else a.capacity
    for v in net.sources - side:
        total += float("inf")
    for v in net.sinks & side:
        total += net.sink_capacity[v]
    return total


def min_cut(net: FlowNetwork, f: Flow) -> frozenset:
    """Nodes reachable from the sources in the residual network of the maximum flow ``f``."""
    problems = flow_violations(net, f)
    if problems:
        raise FlowError("flow infeasible: " + "; ".join(problems))
    res = _Residual(net, f)
    res.reachable()
    if res.seen[res.t]:
        raise FlowError("flow is not maximum: an augmenting path exists")
    side = frozenset(v for v in net.nodes if res.seen[res.index[v]])
    if cut_capacity(net, side) != f.value:
        raise FlowError("cut capacity differs from flow value")
    return side


def cancel_cycles(net: FlowNetwork, f: Flow) -> Flow:
    """Remove every directed cycle carrying flow; supplies and absorption are unchanged."""
    rem = list(f.arc_flow)
    out_arcs: dict[Node, list[int]] = {v: [] for v in net.nodes}
    for k, a in enumerate(net.arcs):
        out_arcs[a.tail].append(k)
    while True:
        cycle = _find_cycle(net, rem, out_arcs)
        if cycle is None:
            return Flow(arc_flow=tuple(rem), value=f.value)
        amount = min(rem[k] for k in cycle)
        for k in cycle:
            rem[k] -= amount


def _find_cycle(net: FlowNetwork, rem: list[int], out_arcs: Mapping[Node, list[int]]) -> list[int] | None:
    state: dict[Node, int] = {}  # 1 = on stack, 2 = finished
    for root in net.nodes:
        if root in state:
            continue
        stack: list[tuple[Node, Iterator[int]]] = [(root, iter(out_arcs[root]))]
        via: list[int] = []
        state[root] = 1
        while stack:
            v, it = stack[-1]
            advanced = False
            for k in it:
                if rem[k] <= 0:
                    continue
                w = net.arcs[k].head
                st = state.get(w)
                if st == 1:
                    # unwind the stack back to w
                    cycle = [k]
                    depth = len(stack) - 1
                    while stack[depth][0] != w:
                        cycle.append(via[depth - 1])
                        depth -= 1
                    return cycle
                if st is None:
                    state[w] = 1
                    stack.append((w, iter(out_arcs[w])))
                    via.append(k)
                    advanced = True
                    break
            if not advanced:
                state[v] = 2
                stack.pop()
                if via:
                    via.pop()
    return None


def decompose(net: FlowNetwork, f: Flow) -> PathDecomposition:
    """Split ``f`` into ``f.value`` unit source-to-sink paths (cycles cancelled first).

    Sources are drained in node declaration order and each walk follows the
    lowest-indexed arc with remaining flow, stopping at the first sink that
    still absorbs flow.
    """
    acyclic = cancel_cycles(net, f)
    rem = list(acyclic.arc_flow)
    bal = node_balance(net, rem)
    supply = {v: bal[v] for v in net.sources}
    absorb = {v: -bal[v] for v in net.sinks}
    out_arcs: dict[Node, list[int]] = {v: [] for v in net.nodes}
    for k, a in enumerate(net.arcs):
        out_arcs[a.tail].append(k)
    paths: list[FlowPath] = []
    for src in net.nodes:
        if src not in net.sources:
            continue
        while supply[src] > 0:
            nodes = [src]
            arcs: list[int] = []
            v = src
            while not (v in net.sinks and absorb[v] > 0):
                k = next((k for k in out_arcs[v] if rem[k] > 0), None)
                if k is None:
                    raise FlowError(f"decomposition stuck at {v!r}")
                arcs.append(k)
                v = net.arcs[k].head
                nodes.append(v)
            for k in arcs:
                rem[k] -= 1
            supply[src] -= 1
            absorb[v] -= 1
            paths.append(FlowPath(nodes=tuple(nodes), arcs=tuple(arcs)))
    return PathDecomposition(paths=tuple(paths))


def flow_from_paths(net: FlowNetwork, paths: Iterable[FlowPath]) -> Flow:
    """Sum unit paths into a per-arc flow of ``net``."""
    arc_flow = [0] * len(net.arcs)
    count = 0
    for p in paths:
        count += 1
        for k in p.arcs:
            arc_flow[k] += 1
    return Flow(arc_flow=tuple(arc_flow), value=count)
