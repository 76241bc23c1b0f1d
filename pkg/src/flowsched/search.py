"""Layered local search that inserts one small job into a partial schedule.

Layer 0 is the job ``j0`` together with every machine small-job relocations
can reach from its eligible set.  Each further layer adds machines whose big
jobs could be pushed out to make room; when enough machines of the newest
layer become light, big jobs are moved along disjoint flow paths and the
search collapses back to an earlier layer.  A signature vector that must
decrease lexicographically bounds the number of rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal, localcontext
from fractions import Fraction
from typing import Iterable

from flowsched.flow import Flow, FlowPath, augment, decompose, max_flow
from flowsched.schedule import (
    DomainError,
    PartialSchedule,
    assign_via_path,
    big_update,
    build_big_network,
    build_small_network,
    small_reachable,
    small_update,
)


class TauTooSmall(Exception):
    """The guess ``tau`` was shown to be below the configuration-LP value."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class IterationGuardError(RuntimeError):
    """The main loop ran far past its theoretical iteration bound."""


@dataclass
class Layer:
    """Sources ``A`` and reachable machines ``B``; ``A`` is ``None`` for layer 0."""

    A: frozenset[str] | None
    B: frozenset[str]


@dataclass
class SearchState:
    schedule: PartialSchedule
    j0: str
    layers: list[Layer]
    exclusions: list[frozenset[str]]

    @property
    def tau(self) -> Fraction:
        return self.schedule.tau

    @property
    def params(self):
        return self.schedule.params

    @property
    def ell(self) -> int:
        return len(self.layers) - 1

    def covered(self, upto: int | None = None) -> set[str]:
        """Machines of layers and exclusion sets with index ``<= upto``."""
        upto = self.ell if upto is None else upto
        out: set[str] = set()
        for k in range(upto + 1):
            layer = self.layers[k]
            out |= layer.B
            if layer.A is not None:
                out |= layer.A
            out |= self.exclusions[k]
        return out

    def b_prefix(self, upto: int) -> set[str]:
        out: set[str] = set()
        for k in range(upto + 1):
            out |= self.layers[k].B
        return out

    def big_count(self, machines: Iterable[str]) -> int:
        big = self.schedule.big_on
        return sum(1 for m in machines if m in big)


@dataclass(frozen=True)
class Signature:
    """Per-layer potentials followed by an infinite sentinel."""

    coords: tuple[int, ...]

    def key(self) -> tuple:
        return self.coords + (math.inf,)

    def __lt__(self, other: "Signature") -> bool:
        return self.key() < other.key()

    def is_increasing(self) -> bool:
        return all(a < b for a, b in zip(self.coords, self.coords[1:]))


# flow helpers --------------------------------------------------------------

def big_flow_value(s: PartialSchedule, S: Iterable[str], T: Iterable[str]) -> int:
    return max_flow(build_big_network(s, S, T)).value


def small_flow_units(s: PartialSchedule, S: Iterable[str], T: Iterable[str]) -> int:
    """Maximum small-job flow, in whole jobs."""
    return max_flow(build_small_network(s, S, T)).value


def is_addable(i: str, state: SearchState, S: set[str], *, _cache: dict | None = None) -> bool:
    """Whether machine ``i`` may join the layer under construction.

    ``i`` must be a small machine outside every layer, exclusion set and
    ``S``; it must raise the big-job flow from ``B`` by one; and moving it
    from the sinks to the sources must raise the small-job flow by at least
    its excess load over ``tau - 1 + R - delta``.
    """
    s = state.schedule
    p = s.params
    covered = state.covered()
    if i in s.big_on or i in covered or i in S:
        return False
    sources_b = [m for m in state.b_prefix(state.ell) if m in s.big_on]
    cache = _cache if _cache is not None else {}
    if "big" not in cache:
        cache["big"] = big_flow_value(s, sources_b, S)
    if big_flow_value(s, sources_b, S | {i}) != cache["big"] + 1:
        return False
    T = set(s.instance.machines) - covered - S
    if "small" not in cache:
        cache["small"] = small_flow_units(s, S, T)
    gain = small_flow_units(s, S | {i}, T - {i}) - cache["small"]
    return p.epsilon * gain >= s.loads[i] - (s.tau - 1 + p.R - p.delta)


def build_layer(state: SearchState) -> tuple[PartialSchedule, frozenset[str], frozenset[str]]:
    """Grow a new layer greedily; raise :class:`TauTooSmall` if it is too small."""
    s = state.schedule
    covered = state.covered()
    machines = s.instance.machines
    S: set[str] = set()
    while True:
        cache: dict = {}
        probe = SearchState(s, state.j0, state.layers, state.exclusions)
        pick = next((i for i in machines if is_addable(i, probe, S, _cache=cache)), None)
        if pick is None:
            break
        T = set(machines) - covered - S
        s, _ = small_update(s, S | {pick}, T - {pick})
        S.add(pick)
    A_new = frozenset(S)
    B_new = frozenset(small_reachable(s, A_new) - A_new - covered)
    need = s.params.mu1 * len(state.b_prefix(state.ell))
    if len(A_new) < need:
        raise TauTooSmall(f"new layer has {len(A_new)} machines, needs at least {need}")
    return s, A_new, B_new


def canonical_decomposition(state: SearchState, I: Iterable[str]) -> tuple[list[frozenset[str]], Flow, tuple[FlowPath, ...]]:
    """Staged maximum flow from layer prefixes into the light machines.

    Returns ``[I'_0, ..., I'_ell]`` (``I'_0`` is empty), the flow and its
    unit paths.  ``I'_i`` collects the sinks of paths starting in ``B_{i-1}``.
    """
    s = state.schedule
    ell = state.ell
    sinks: set[str] = set(I)
    for k in range(ell + 1):
        sinks |= state.exclusions[k]
    net = build_big_network(s, [m for m in state.layers[0].B if m in s.big_on], sinks)
    x = max_flow(net)
    for k in range(1, ell):
        net = build_big_network(s, [m for m in state.b_prefix(k) if m in s.big_on], sinks)
        x = augment(net, x)
    paths = decompose(net, x).paths
    out = [frozenset()]
    for k in range(1, ell + 1):
        src = state.layers[k - 1].B
        out.append(frozenset(p.sink[1] for p in paths if p.source[1] in src))
    return out, x, paths


def _floor_log(base: Fraction, x: Fraction) -> int:
    """Largest ``k >= 0`` with ``base**k <= x``, for ``base > 1`` and ``x >= 1``.

    ``base`` can be so close to 1 that ``k`` runs into the millions, so the
    quotient of logarithms is evaluated in decimal arithmetic with growing
    precision until its floor is certain.  Near-ties with a moderate ``k``
    are settled by exact integer powers.
    """
    if x == 1:
        return 0
    digits = 50
    while True:
        with localcontext() as ctx:
            ctx.prec = digits
            lb = Decimal(base.numerator).ln() - Decimal(base.denominator).ln()
            lx = Decimal(x.numerator).ln() - Decimal(x.denominator).ln()
            q = lx / lb
            k = int(q.to_integral_value(rounding=ROUND_FLOOR))
            slack = abs(q) * Decimal(10) ** (10 - digits) + Decimal(10) ** (10 - digits)
            if q - k > slack and k + 1 - q > slack:
                return k
        if digits >= 800:
            break
        digits *= 2
    k = max(0, int(q.to_integral_value(rounding=ROUND_FLOOR)) - 1)
    while base ** (k + 1) <= x:
        k += 1
    return k


def signature(state: SearchState) -> Signature:
    """Signature vector of the current layers.

    Raises :class:`TauTooSmall` if some ``B_i`` holds no big machine, since
    the potential is then undefined.
    """
    p = state.params
    base = 1 / (1 - p.mu1 * p.mu2)
    coords = []
    for i, layer in enumerate(state.layers):
        n = state.big_count(layer.B)
        if n == 0:
            raise TauTooSmall(f"signature undefined: B_{i} holds no big machine")
        coords.append(_floor_log(base, (1 / p.eta) ** i * n) + i)
    return Signature(tuple(coords))


def monitor_violations(state: SearchState) -> list[str]:
    """Invariants that must hold at the start of each main-loop round when tau is large enough."""
    s = state.schedule
    p = s.params
    ell = state.ell
    out = list(s.violations())
    sets: list[tuple[str, frozenset[str]]] = []
    for k, layer in enumerate(state.layers):
        if layer.A is not None:
            sets.append((f"A_{k}", layer.A))
        sets.append((f"B_{k}", layer.B))
        sets.append((f"I_{k}", state.exclusions[k]))
    seen: dict[str, str] = {}
    for name, members in sets:
        for m in members:
            if m in seen:
                out.append(f"disjointness: {m!r} in {seen[m]} and {name}")
            seen[m] = name
    bound = s.cap - p.epsilon
    for k in range(ell + 1):
        for m in state.layers[k].B:
            if s.loads[m] <= bound:
                out.append(f"light machine {m!r} in B_{k}")
    layered = state.covered() - set().union(*state.exclusions)
    allowed = state.covered()
    for m in layered:
        for j in s.small_on[m]:
            if not s.instance.job(j).eligible <= allowed:
                out.append(f"small job {j!r} on {m!r} can leave the layers")
    if state.big_count(state.layers[0].B) < 1:
        out.append("B_0 holds no big machine")
    growth = p.delta * (1 - p.mu2) - 2 * p.mu2
    for k in range(1, ell + 1):
        A = state.layers[k].A
        light = sum(1 for m in A if s.fits_big(m))
        if light >= p.mu2 * len(A):
            out.append(f"layer {k} collapsible")
        if not state.big_count(state.layers[k].B) > growth * len(A):
            out.append(f"B_{k} has too few big machines")
    for k in range(ell):
        if not len(state.exclusions[k + 1]) < p.mu1 * p.mu2 * state.big_count(state.layers[k].B):
            out.append(f"I_{k + 1} too large")
        A_next = state.layers[k + 1].A
        sinks = set(A_next)
        for q in range(k + 2):
            sinks |= state.exclusions[q]
        try:
            value = big_flow_value(s, [m for m in state.b_prefix(k) if m in s.big_on], sinks)
        except DomainError as exc:
            out.append(f"disjoint-path count for layer {k + 1} undefined: {exc}")
        else:
            if value < len(A_next):
                out.append(f"only {value} disjoint paths into A_{k + 1} (size {len(A_next)})")
        if len(A_next) < p.mu1 * len(state.b_prefix(k)):
            out.append(f"A_{k + 1} smaller than mu1 * |B_<={k}|")
    return out


@dataclass
class SearchStats:
    main_loop_iterations: int = 0
    layers_built: int = 0
    collapses: int = 0
    monitor_checks: int = 0
    max_depth: int = 0
    violations: list[str] = field(default_factory=list)

    def merge(self, other: "SearchStats") -> None:
        self.main_loop_iterations += other.main_loop_iterations
        self.layers_built += other.layers_built
        self.collapses += other.collapses
        self.monitor_checks += other.monitor_checks
        self.max_depth = max(self.max_depth, other.max_depth)
        self.violations.extend(other.violations)


def iteration_budget(s: PartialSchedule) -> int:
    return (len(s.instance.machines) + len(s.instance.jobs)) ** 4 + 1000


def local_search(
    tau: Fraction,
    s: PartialSchedule,
    j0: str,
    check_invariants: bool = False,
    stats: SearchStats | None = None,
) -> PartialSchedule:
    """Return a copy of ``s`` that also schedules the small job ``j0``.

    Raises :class:`TauTooSmall` when the run certifies that ``tau`` is too
    small, and :class:`IterationGuardError` if the iteration guard trips.
    """
    if Fraction(tau) != s.tau:
        raise DomainError(f"schedule built for tau={s.tau}, called with {tau}")
    job = s.instance.job(j0)
    if job.is_big or s.assignment[j0] is not None:
        raise DomainError(f"{j0!r} is not an unscheduled small job")
    stats = stats if stats is not None else SearchStats()
    p = s.params
    s = s.copy()
    state = SearchState(s, j0, [Layer(None, small_reachable(s, job.eligible))], [frozenset()])
    budget = iteration_budget(s)
    previous: Signature | None = None

    def b0_open() -> bool:
        return any(state.schedule.fits_small(m) for m in state.layers[0].B)

    if not b0_open() and state.big_count(state.layers[0].B) == 0:
        raise TauTooSmall("no big machine reachable from the job's eligible machines")

    while not b0_open():
        stats.main_loop_iterations += 1
        if stats.main_loop_iterations > budget:
            raise IterationGuardError(f"main loop exceeded {budget} iterations")
        sig = signature(state)
        if check_invariants:
            stats.monitor_checks += 1
            problems = monitor_violations(state)
            if not sig.is_increasing():
                problems.append(f"signature {sig.coords} not increasing")
            if problems:
                stats.violations.extend(problems)
                raise TauTooSmall("invariant violated: " + problems[0])
        if previous is not None and not sig < previous:
            raise TauTooSmall(f"signature {sig.coords} did not decrease from {previous.coords}")
        previous = sig

        sched, A_new, B_new = build_layer(state)
        stats.layers_built += 1
        state.schedule = sched
        state.layers.append(Layer(A_new, B_new))
        state.exclusions.append(frozenset())
        stats.max_depth = max(stats.max_depth, state.ell)

        while state.ell >= 1:
            s = state.schedule
            A_top = state.layers[-1].A
            light = frozenset(m for m in A_top if s.fits_big(m))
            if len(light) < p.mu2 * len(A_top):
                break
            parts, _, paths = canonical_decomposition(state, light)
            ell = state.ell
            for k in range(1, ell + 1):
                state.exclusions[k] = parts[k]
            r = next(
                (
                    k
                    for k in range(1, ell + 1)
                    if len(state.exclusions[k]) >= p.mu1 * p.mu2 * state.big_count(state.layers[k - 1].B)
                ),
                None,
            )
            if r is None:
                raise TauTooSmall("collapse found no layer with enough light machines")
            stats.collapses += 1
            chosen = [f for f in paths if f.sink[1] in state.exclusions[r]]
            s = big_update(s, chosen)
            if r > 1:
                A_prev = state.layers[r - 1].A
                s, _ = small_update(s, A_prev, state.layers[r - 1].B)
                state.schedule = s
                older = state.covered(r - 2)
                state.layers[r - 1] = Layer(A_prev, frozenset(small_reachable(s, A_prev) - A_prev - older))
            state.schedule = s
            del state.layers[r:]
            del state.exclusions[r:]

    result = assign_via_path(state.schedule, j0)
    if result is None:
        raise RuntimeError(f"no relocation path from {j0!r} to a machine with room")
    return result
