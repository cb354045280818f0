import json

import pytest

import planex


def load(name):
    return json.loads((planex.data_dir() / name).read_text())


def test_scenario_task():
    out = planex.run_task(load("world/scenario_task.json"))
    assert out["completed"]
    assert out["final_answer"].startswith("alice has 2 orders")
    variables = {v["name"]: v for v in out["variables"]}
    assert variables["order_count"]["value"] == 2
    assert variables["order_count"]["producer"] == "s1"
    assert [e["seq"] for e in out["events"]] == list(range(len(out["events"])))


def test_metrics_fixture():
    m = planex.metrics(load("fixtures/run_812.json"))
    assert m["tasks"] == 812
    assert m["task_completion_rate"] == pytest.approx(61.7, abs=0.05)


def test_compare_partitions_new_run():
    base = {"run_id": "a", "results": {"t1": {"status": "failure"}, "t2": {"status": "success"}}}
    new = {"run_id": "b", "results": {"t1": {"status": "success"}, "t3": {"status": "failure"}}}
    for run in (base, new):
        run["sample"] = {"name": "full", "size": 2, "selection": "all_tasks", "seed": 0}
        for r in run["results"].values():
            r.update(steps=1, duration_ms=0.0, template_id="x")
    c = planex.compare(base, new)
    assert c["resolved"] == ["t1"]
    assert c["newly_covered"] == ["t3"]
    assert c["dropped"] == ["t2"]


def test_sample_ladder_nests():
    small = set(planex.sample_ids("initial", seed=4))
    bigger = set(planex.sample_ids("nano", seed=4))
    assert len(small) == 22 and len(bigger) == 44
    assert small <= bigger


def test_small_benchmark():
    run = planex.run_sample("initial", seed=1, workers=2)
    assert len(run["results"]) == 22
    assert {r["status"] for r in run["results"].values()} <= {"success", "failure", "error"}


def test_program_execution():
    out = planex.execute("let xs = sort(unique(concat(a, [3, 1])))\nreturn {n: len(xs), top: max(xs)}", {"a": [5, 3]})
    assert out["status"] == "ok"
    assert out["returned"] == {"n": 3, "top": 5}
    assert planex.execute("return {x: 1 / 0}")["status"] == "expr_error"


def test_errors_carry_kind():
    with pytest.raises(RuntimeError, match="ProgramParseError"):
        planex.execute("return {")
