"""Smoke test for the planweave extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
Run from the workspace root:  python crates/py/python/smoke_test.py
"""
import json
import pathlib

import planweave

ROOT = pathlib.Path(__file__).resolve().parents[3]
DATA = ROOT / "data"


def main():
    plan = planweave.Plan.from_json((DATA / "plans" / "add.json").read_text())
    assert plan.node_ids == [1, 2], plan.node_ids
    assert planweave.validate(plan)["errors"] == []

    cyclic = planweave.parse((DATA / "plans" / "cyclic.json").read_text())
    codes = {issue["code"] for issue in planweave.validate(cyclic)["errors"]}
    assert "CYCLE" in codes, codes

    ran, trace = planweave.execute(plan)
    assert json.loads(trace.splitlines()[-1]) == {"final_answer": 7}
    assert dict(ran.statuses()) == {1: "done", 2: "done"}

    edited = planweave.edit(ran, {"kind": "set_task", "node": 1, "task": "Find the two numbers"})
    assert dict(edited.statuses()) == {1: "stale", 2: "stale"}
    resumed, _ = planweave.resume(edited)
    assert dict(resumed.statuses()) == {1: "done", 2: "done"}

    try:
        planweave.edit(plan, {"kind": "add_edge", "src_node": 2, "src_output": "sum",
                              "dest_node": 1, "dest_input": "query"})
    except planweave.PlanweaveError as e:
        assert "cycle" in str(e).lower(), e
    else:
        raise AssertionError("cycle was accepted")

    registry = planweave.Registry.load(str(DATA / "registry.json"))
    corpus = json.loads((DATA / "corpus.json").read_text())
    gold = planweave.Plan.from_dict(corpus[0]["gold_plan"])
    flawed, record = planweave.corrupt(gold, "wrong_agent", 3, registry)
    assert not planweave.is_isomorphic(gold, flawed)
    assert planweave.ged(gold, flawed) == (1, True)
    assert record["kind"] == "wrong_agent"
    assert planweave.diff(flawed, gold)[0]["kind"] == "set_agent"

    report = planweave.run_eval(str(DATA / "corpus.json"), str(DATA / "registry.json"),
                                modes=["dm_fix"], kinds=["remove_edge", "wrong_agent"])
    for modes in report.values():
        for cell in modes["dm_fix"].values():
            assert (cell["acc"], cell["iso"], cell["ged"]) == (100.0, 100.0, 0.0), cell
    print("planweave smoke test ok:", len(registry), "agents,", sum(
        c["n"] for m in report.values() for c in m["dm_fix"].values()), "cases")


if __name__ == "__main__":
    main()
