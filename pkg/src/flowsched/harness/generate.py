"""Seeded random instance families.

``uniform``
    every job is eligible on every machine independently with probability
    ``density`` (at least one machine is always kept).
``clustered``
    machines are split into contiguous groups; each job lives in one group
    and a share of the small jobs also reaches one machine of the next
    group, which produces long relocation chains.
``tight``
    big jobs go to distinct machines and small jobs fill the remaining
    machines up to load 1, so the planted schedule has makespan 1; small
    jobs beyond that capacity are spread round-robin as overflow.  Each big
    job is also eligible on one filled machine, which tempts the initial
    matching into a placement the search has to undo.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import floor

from flowsched.instance import BIG, SMALL, Instance, Job

FAMILIES = ("uniform", "clustered", "tight")


@dataclass(frozen=True)
class GeneratorConfig:
    family: str = "uniform"
    machines: int = 4
    big: int = 2
    small: int = 6
    epsilon: Fraction = Fraction(1, 2)
    density: float = 0.5
    clusters: int = 2
    bridge: float = 0.3
    seed: int = 0


def _subset(rng: random.Random, pool: list[str], density: float) -> set[str]:
    chosen = {m for m in pool if rng.random() < density}
    if not chosen:
        chosen.add(rng.choice(pool))
    return chosen


def _groups(machines: list[str], k: int) -> list[list[str]]:
    k = max(1, min(k, len(machines)))
    size, extra = divmod(len(machines), k)
    out, start = [], 0
    for g in range(k):
        end = start + size + (g < extra)
        out.append(machines[start:end])
        start = end
    return out


def generate(config: GeneratorConfig) -> Instance:
    """Build the instance described by ``config``; equal configs give equal instances."""
    if config.machines < 1:
        raise ValueError("generator needs at least one machine")
    if config.family not in FAMILIES:
        raise ValueError(f"unknown family {config.family!r}; expected one of {FAMILIES}")
    if config.big < 0 or config.small < 0:
        raise ValueError("job counts must be non-negative")
    eps = Fraction(config.epsilon)
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    rng = random.Random(config.seed)
    machines = [f"m{k + 1}" for k in range(config.machines)]
    kinds = [(f"b{k + 1}", BIG) for k in range(config.big)] + [(f"s{k + 1}", SMALL) for k in range(config.small)]
    jobs: list[Job] = []

    if config.family == "uniform":
        for jid, size in kinds:
            jobs.append(Job(jid, size, frozenset(_subset(rng, machines, config.density))))

    elif config.family == "clustered":
        groups = _groups(machines, config.clusters)
        for jid, size in kinds:
            g = rng.randrange(len(groups))
            elig = _subset(rng, groups[g], config.density)
            if size == SMALL and len(groups) > 1 and rng.random() < config.bridge:
                elig.add(rng.choice(groups[(g + 1) % len(groups)]))
            jobs.append(Job(jid, size, frozenset(elig)))

    else:
        if config.big > config.machines:
            raise ValueError("tight family needs at most one big job per machine")
        order = list(machines)
        rng.shuffle(order)
        home: dict[str, str] = {}
        for k in range(config.big):
            home[f"b{k + 1}"] = order[k]
        free = order[config.big:]
        per_machine = floor(1 / eps)
        slots = [m for m in free for _ in range(per_machine)]
        for k in range(config.small):
            if k < len(slots):
                home[f"s{k + 1}"] = slots[k]
            else:
                home[f"s{k + 1}"] = order[(k - len(slots)) % len(order)]
        for jid, size in kinds:
            elig = {home[jid]} | {m for m in machines if rng.random() < config.density}
            if size == BIG and free:
                # a decoy among the filled machines lures the initial matching
                elig.add(rng.choice(free))
            jobs.append(Job(jid, size, frozenset(elig)))

    return Instance(eps, tuple(machines), tuple(jobs))
