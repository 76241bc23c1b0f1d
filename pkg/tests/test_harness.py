import json
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from corpus import EX1, inst
from flowsched.harness.cli import main
from flowsched.harness.generate import FAMILIES, GeneratorConfig, generate
from flowsched.harness.io import (
    dumps_instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)
from flowsched.instance import InstanceError
from flowsched.oracle import brute_force_opt

INFEASIBLE_AT_ONE = inst(Fraction(1, 2), "m1 m2", ("b1", "big", "m2"), *[(f"s{k}", "small", "m1") for k in range(5)])


@pytest.fixture
def ex1_file(tmp_path):
    path = tmp_path / "ex1.json"
    save_instance(EX1, path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_round_trip(ex1_file):
    assert load_instance(ex1_file) == EX1
    assert instance_from_dict(json.loads(dumps_instance(EX1))) == EX1


@pytest.mark.parametrize(
    "doc",
    [
        {"epsilon": [1, 0], "machines": ["m1"], "jobs": []},
        {"epsilon": [1, 2], "machines": ["m1"], "jobs": [{"id": "a", "size": "huge", "eligible": ["m1"]}]},
        {"epsilon": [1, 2], "machines": ["m1"], "jobs": [{"id": "a", "size": "small", "eligible": ["m9"]}]},
        {"epsilon": [3, 2], "machines": ["m1"], "jobs": []},
        {"epsilon": 0.5, "machines": ["m1"], "jobs": []},
        {"machines": ["m1"], "jobs": []},
        [],
    ],
)
def test_malformed_documents(doc):
    with pytest.raises(InstanceError):
        instance_from_dict(doc)


@given(
    st.sampled_from(FAMILIES),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=4),
    st.integers(min_value=0, max_value=10),
    st.sampled_from([Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)]),
    st.integers(min_value=0, max_value=10**6),
)
def test_generator_properties(family, machines, big, small, eps, seed):
    cfg = GeneratorConfig(family=family, machines=machines, big=min(big, machines), small=small, epsilon=eps, seed=seed)
    a, b = generate(cfg), generate(cfg)
    assert a == b
    assert instance_from_dict(instance_to_dict(a)) == a
    assert len(a.big_jobs) == cfg.big and len(a.small_jobs) == small


def test_generator_degenerate_families():
    full = generate(GeneratorConfig(family="uniform", density=1.0, seed=4))
    assert all(set(j.eligible) == set(full.machines) for j in full.jobs)
    one = generate(GeneratorConfig(family="clustered", clusters=1, density=1.0, seed=4))
    assert one == full


def test_tight_family_planted_optimum():
    for seed in range(40):
        for machines in range(1, 5):
            big = seed % (machines + 1)
            # room for every small job on the planted machines
            small = (machines - big) * 2
            i = generate(GeneratorConfig(family="tight", machines=machines, big=big, small=small, seed=seed))
            expected = 1 if i.jobs and (big or small) else 0
            assert brute_force_opt(i).opt_makespan == expected


def test_cli_solve_ex1(capsys, ex1_file):
    code, out, _ = run(capsys, "solve", "--instance", ex1_file, "--json")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "ok"
    from flowsched.numerics import make_params

    assert Fraction(*doc["makespan"]) <= 1 + make_params(Fraction(1, 2), Fraction(1, 10)).R


def test_cli_tau_infeasible_exit_2(capsys, tmp_path):
    path = tmp_path / "hard.json"
    save_instance(INFEASIBLE_AT_ONE, path)
    code, out, _ = run(capsys, "solve", "--instance", path, "--method", "local-search", "--tau", "1", "--zeta", "1/1000", "--json")
    assert code == 2 and json.loads(out)["status"] == "no-result"
    code, _, _ = run(capsys, "solve", "--instance", path, "--method", "local-search", "--zeta", "1/1000")
    assert code == 2


def test_cli_malformed_epsilon_exit_1(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epsilon": [1, 0], "machines": ["m1"], "jobs": []}))
    code, out, err = run(capsys, "solve", "--instance", path)
    assert code == 1 and "zero denominator" in err
    code, _, _ = run(capsys, "solve", "--instance", tmp_path / "missing.json")
    assert code == 1


def test_cli_usage_errors_exit_1(capsys, ex1_file):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1
    assert run(capsys, "solve", "--instance", ex1_file, "--tau", "1")[0] == 1
    assert run(capsys, "solve", "--instance", ex1_file, "--zeta", "0")[0] == 1
    assert run(capsys, "solve", "--instance", ex1_file, "--jobs", "0")[0] == 1


def test_cli_gen_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen", "--seed", 42, "--out", a)[0] == 0
    assert run(capsys, "gen", "--seed", 42, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = run(capsys, "gen", "--seed", 42)
    assert out == a.read_text()
    assert run(capsys, "gen", "--family", "tight", "--machines", 1, "--big", 2)[0] == 1


def test_cli_verify_round_trip(capsys, tmp_path, ex1_file):
    code, out, _ = run(capsys, "solve", "--instance", ex1_file, "--json", "--method", "matching")
    report = tmp_path / "report.json"
    report.write_text(out)
    code, out, _ = run(capsys, "verify", "--instance", ex1_file, "--schedule", report)
    makespan = Fraction(*json.loads(report.read_text())["makespan"])
    assert code == 0 and out.strip() == f"valid: makespan {makespan}"
    doc = json.loads(report.read_text())
    doc["makespan"] = [7, 1]
    report.write_text(json.dumps(doc))
    assert run(capsys, "verify", "--instance", ex1_file, "--schedule", report)[0] == 1
    doc["assignment"]["s1"] = "m2"
    report.write_text(json.dumps({"assignment": doc["assignment"]}))
    code, out, _ = run(capsys, "verify", "--instance", ex1_file, "--schedule", report)
    assert code == 1 and out.startswith("invalid")


def test_cli_oracle(capsys, ex1_file):
    code, out, _ = run(capsys, "oracle", "--instance", ex1_file, "--json")
    assert code == 0 and json.loads(out)["opt"] == [1, 1]
    code, out, _ = run(capsys, "oracle", "--instance", ex1_file)
    assert out.splitlines()[0] == "OPT = 1"


def test_cli_zeta_from_environment(capsys, monkeypatch, ex1_file):
    monkeypatch.setenv("FLOWSCHED_ZETA", "1/1000")
    _, out, _ = run(capsys, "solve", "--instance", ex1_file, "--json", "--method", "local-search")
    from flowsched.numerics import make_params

    tiny = make_params(Fraction(1, 2), Fraction(1, 1000))
    assert Fraction(*json.loads(out)["makespan"]) <= 1 + tiny.R
    monkeypatch.setenv("FLOWSCHED_ZETA", "abc")
    with pytest.raises(SystemExit):
        main(["solve", "--instance", str(ex1_file)])


def test_cli_multiple_instances_and_workers(capsys, tmp_path, ex1_file):
    other = tmp_path / "hard.json"
    save_instance(INFEASIBLE_AT_ONE, other)
    code, out, _ = run(capsys, "solve", "--instance", ex1_file, "--instance", other, "--json", "--jobs", 2, "--seed", 7)
    docs = json.loads(out)
    assert code == 0 and [d["status"] for d in docs] == ["ok", "ok"] and docs[0]["seed"] == 7
    code, out, _ = run(capsys, "solve", "--instance", ex1_file, "--instance", other, "--timing")
    assert code == 0 and "makespan:" in out


def test_module_entry_point(ex1_file):
    proc = subprocess.run([sys.executable, "-m", "flowsched", "solve", "--instance", str(ex1_file)], capture_output=True, text=True)
    assert proc.returncode == 0 and "status:   ok" in proc.stdout
