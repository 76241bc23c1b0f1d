"""Problem instances, total schedules and the discrete grid of makespan guesses."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Iterable, Mapping

BIG = "big"
SMALL = "small"


class InstanceError(ValueError):
    """Raised when an instance fails validation."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class InvalidScheduleError(ValueError):
    """Raised when a schedule does not respect the instance."""


@dataclass(frozen=True)
class Job:
    id: str
    size_class: str
    eligible: frozenset[str]

    @property
    def is_big(self) -> bool:
        return self.size_class == BIG


@dataclass(frozen=True)
class Instance:
    """A two-size restricted assignment instance.

    Big jobs have processing time 1 and small jobs processing time
    ``epsilon``.  Machine and job order is significant: every tie in the
    solvers is broken by declaration order.
    """

    epsilon: Fraction
    machines: tuple[str, ...]
    jobs: tuple[Job, ...]
    _job_index: Mapping[str, Job] = field(init=False, repr=False, compare=False)
    _machine_rank: Mapping[str, int] = field(init=False, repr=False, compare=False)
    _job_rank: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "_job_index", {j.id: j for j in self.jobs})
        object.__setattr__(self, "_machine_rank", {m: k for k, m in enumerate(self.machines)})
        object.__setattr__(self, "_job_rank", {j.id: k for k, j in enumerate(self.jobs)})

    def job(self, job_id: str) -> Job:
        return self._job_index[job_id]

    def machine_rank(self, machine: str) -> int:
        return self._machine_rank[machine]

    def job_rank(self, job_id: str) -> int:
        return self._job_rank[job_id]

    def size(self, job_id: str) -> Fraction:
        return Fraction(1) if self._job_index[job_id].is_big else self.epsilon

    @property
    def big_jobs(self) -> tuple[Job, ...]:
        return tuple(j for j in self.jobs if j.is_big)

    @property
    def small_jobs(self) -> tuple[Job, ...]:
        return tuple(j for j in self.jobs if not j.is_big)

    def total_load(self) -> Fraction:
        return sum((self.size(j.id) for j in self.jobs), Fraction(0))

    def sorted_machines(self, machines: Iterable[str]) -> list[str]:
        """Return ``machines`` in declaration order."""
        return sorted(machines, key=self._machine_rank.__getitem__)


@dataclass(frozen=True)
class Schedule:
    """A total assignment of jobs to machines."""

    assignment: Mapping[str, str]

    def loads(self, instance: Instance) -> dict[str, Fraction]:
        out = {m: Fraction(0) for m in instance.machines}
        for job_id, machine in self.assignment.items():
            out[machine] += instance.size(job_id)
        return out


def validate(instance: Instance) -> list[str]:
    """List every structural problem of ``instance``; an empty list means ok."""
    violations: list[str] = []
    if not 0 < instance.epsilon < 1:
        violations.append(f"epsilon {instance.epsilon} outside (0, 1)")
    seen_m: set[str] = set()
    for m in instance.machines:
        if m in seen_m:
            violations.append(f"duplicate machine id {m!r}")
        seen_m.add(m)
    seen_j: set[str] = set()
    for job in instance.jobs:
        if job.id in seen_j:
            violations.append(f"duplicate job id {job.id!r}")
        seen_j.add(job.id)
        if job.size_class not in (BIG, SMALL):
            violations.append(f"job {job.id!r}: unknown size class {job.size_class!r}")
        if not job.eligible:
            violations.append(f"job {job.id!r}: empty eligibility")
        for m in sorted(job.eligible - seen_m):
            violations.append(f"job {job.id!r}: unknown machine {m!r}")
    return violations


def check_schedule(instance: Instance, schedule: Schedule) -> None:
    """Raise :class:`InvalidScheduleError` unless ``schedule`` is total and eligible."""
    if set(schedule.assignment) != {j.id for j in instance.jobs}:
        missing = sorted({j.id for j in instance.jobs} - set(schedule.assignment))
        extra = sorted(set(schedule.assignment) - {j.id for j in instance.jobs})
        raise InvalidScheduleError(f"schedule not total: missing {missing}, unknown {extra}")
    for job in instance.jobs:
        machine = schedule.assignment[job.id]
        if machine not in job.eligible:
            raise InvalidScheduleError(f"job {job.id!r} assigned to ineligible machine {machine!r}")


def makespan(instance: Instance, schedule: Schedule) -> Fraction:
    check_schedule(instance, schedule)
    loads = schedule.loads(instance)
    return max(loads.values(), default=Fraction(0))


def tau_candidates(instance: Instance) -> list[Fraction]:
    """Possible configuration-LP values inside ``[1, 2)``.

    These are the numbers ``k*eps`` and ``1 + k*eps`` in ``[1, 2)``, capped at
    the total processing load plus one.
    """
    eps = instance.epsilon
    values: set[Fraction] = set()
    for k in range(ceil(1 / eps), ceil(2 / eps)):
        values.add(k * eps)
    for k in range(0, ceil(1 / eps)):
        values.add(1 + k * eps)
    cap = instance.total_load() + 1
    return sorted(v for v in values if 1 <= v < 2 and v <= cap)
