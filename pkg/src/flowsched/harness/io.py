"""JSON instance and report files.

Instance files hold ``epsilon`` as an integer pair ``[num, den]`` so no
float rounding ever enters a run.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from flowsched.instance import BIG, SMALL, Instance, InstanceError, Job, Schedule, validate


def fraction_pair(x: Fraction) -> list[int]:
    x = Fraction(x)
    return [x.numerator, x.denominator]


def parse_fraction_pair(value: Any, name: str) -> Fraction:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise InstanceError([f"{name} must be a pair of integers [num, den], got {value!r}"])
    if value[1] == 0:
        raise InstanceError([f"{name} has a zero denominator"])
    return Fraction(value[0], value[1])


def instance_from_dict(data: Any) -> Instance:
    """Parse and validate an instance document."""
    if not isinstance(data, dict):
        raise InstanceError(["instance document must be a JSON object"])
    problems = [f"missing field {k!r}" for k in ("epsilon", "machines", "jobs") if k not in data]
    if problems:
        raise InstanceError(problems)
    eps = parse_fraction_pair(data["epsilon"], "epsilon")
    machines = data["machines"]
    if not isinstance(machines, list) or not all(isinstance(m, str) for m in machines):
        raise InstanceError(["machines must be a list of strings"])
    if not isinstance(data["jobs"], list):
        raise InstanceError(["jobs must be a list"])
    jobs = []
    for k, raw in enumerate(data["jobs"]):
        if not isinstance(raw, dict) or not {"id", "size", "eligible"} <= raw.keys():
            raise InstanceError([f"job #{k} needs fields id, size, eligible"])
        if not isinstance(raw["id"], str) or not isinstance(raw["eligible"], list):
            raise InstanceError([f"job #{k}: id must be a string and eligible a list"])
        if raw["size"] not in (BIG, SMALL):
            raise InstanceError([f"job {raw['id']!r}: size must be 'big' or 'small'"])
        jobs.append(Job(raw["id"], raw["size"], frozenset(raw["eligible"])))
    inst = Instance(eps, tuple(machines), tuple(jobs))
    problems = validate(inst)
    if problems:
        raise InstanceError(problems)
    return inst


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    return {
        "epsilon": fraction_pair(inst.epsilon),
        "machines": list(inst.machines),
        "jobs": [
            {"id": j.id, "size": j.size_class, "eligible": inst.sorted_machines(j.eligible)}
            for j in inst.jobs
        ],
    }


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError([f"cannot read {path}: {exc}"]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError([f"{path}: invalid JSON ({exc})"]) from exc
    return instance_from_dict(data)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst))


def report_to_dict(report) -> dict[str, Any]:
    """Serialisable form of a :class:`~flowsched.solvers.SolveReport`."""
    return {
        "assignment": dict(sorted(report.schedule.assignment.items())),
        "makespan": fraction_pair(report.makespan),
        "method": report.method,
        "tau": None if report.tau_used is None else fraction_pair(report.tau_used),
        "stats": report.stats,
    }


def schedule_from_dict(data: Any) -> Schedule:
    """Read the ``assignment`` of a report or bare schedule document."""
    if isinstance(data, dict) and "assignment" in data:
        data = data["assignment"]
    if not isinstance(data, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
        raise InstanceError(["schedule must map job ids to machine ids"])
    return Schedule(dict(data))


def load_schedule(path: str | Path) -> tuple[Schedule, Any]:
    """Return the schedule in ``path`` and the raw document."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError([f"cannot read schedule {path}: {exc}"]) from exc
    return schedule_from_dict(data), data
