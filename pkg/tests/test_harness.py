from pathlib import Path

import pytest

from conftest import landmark, scenario, undirected
from ctxplan.belief import Belief
from ctxplan.cli import main
from ctxplan.core import LexOrdering, WorldGraph, degenerate_model
from ctxplan.generate import m_violation_instance
from ctxplan.harness import (
    AMBIGUOUS,
    SUCCESS,
    RunRecord,
    emit_metrics,
    lcbs_planner,
    run_two_stage,
    simulate_execution,
    success_rate,
)
from ctxplan.cimop import InferenceTrace, TraceStep
from ctxplan.lcbs import detect_first_conflict, lcbs_plan
from ctxplan.scenario_io import load_scenario, save_scenario

GOLDEN = Path(__file__).resolve().parent.parent / "scenarios" / "salp_small.json"
ORDERS3 = [LexOrdering((0,))] * 3


def _ambiguous():
    g = undirected([(i, i + 1, (1,)) for i in range(4)])
    lm = landmark("L", [3], (1, [{"c1", "c2", "c3"}]))
    return scenario(g, [("r0", 0, 1)], orderings=ORDERS3, landmarks=[lm], sid="amb")


class TestRunTwoStage:
    def test_golden(self):
        s = load_scenario(GOLDEN)
        rec = run_two_stage(s)
        assert rec.status == SUCCESS and rec.inferred == s.true_context
        ent = rec.trace.entropies
        assert ent[0] == 2 and 1 in ent and ent[-1] == 0
        assert detect_first_conflict(rec.plan.paths) is None
        for r, v in rec.trace.final_positions.items():
            assert rec.plan.paths[r][0] == v
        assert rec.stage1_ms > 0 and rec.stage2_ms > 0

    def test_collapsed_belief_is_plain_lcbs(self):
        s = load_scenario(GOLDEN)
        s = s.replace(initial_belief=Belief.point(s.context_ids, "c2"))
        rec = run_two_stage(s)
        assert rec.trace.steps == [] and rec.inferred == "c2"
        assert rec.plan.paths == lcbs_plan(s, s.ordering("c2")).paths

    def test_ambiguous_has_no_plan(self):
        rec = run_two_stage(_ambiguous())
        assert rec.status == AMBIGUOUS and rec.plan is None and rec.message

    def test_record_status_checked(self):
        with pytest.raises(ValueError):
            RunRecord("x", "great")


def _record(sid, entropies):
    b = Belief.uniform(["c1"])
    steps = [TraceStep(i, {}, b, e, ()) for i, e in enumerate(entropies)]
    return RunRecord(sid, SUCCESS, InferenceTrace(steps, "c1", {}), "c1", true_context="c1")


class TestMetrics:
    def test_cumulative_entropy(self):
        rows = emit_metrics([_record("a", [2, 2, 1, 0])])["summary"].splitlines()
        assert rows[1].split(",")[4] == "5"

    def test_shape(self):
        recs = [_record(f"s{i}", [2, 1, 0]) for i in range(5)]
        out = emit_metrics(recs)
        summary = out["summary"].splitlines()
        assert len(summary) == 1 + 5 + 1 and summary[-1].startswith("mean,5/5")
        assert len(out["entropy"].splitlines()) == 1 + 15

    def test_empty(self):
        out = emit_metrics([])
        assert out["summary"].strip() == ",".join(
            ["scenario", "status", "true_context", "inferred", "cumulative_entropy", "steps_to_collapse", "stage1_ms", "stage2_ms", "cost"]
        )
        assert out["entropy"].strip() == "scenario,step,entropy"

    def test_matches_serialized_trajectory(self):
        rec = run_two_stage(load_scenario(GOLDEN))
        out = emit_metrics([rec])
        total = sum(int(r.split(",")[2]) for r in out["entropy"].splitlines()[1:])
        assert int(out["summary"].splitlines()[1].split(",")[4]) == total


class TestSuccessRate:
    def test_zero_budget(self):
        s = m_violation_instance()
        assert success_rate([s], lcbs_planner, 0.0, oracle={s.id: (2, 10_000, 2)}) == 0.0

    def test_lcbs_on_violation_instance(self):
        s = m_violation_instance()
        assert success_rate([s], lcbs_planner, 30.0, oracle={s.id: (2, 10_000, 2)}) == 1.0

    def test_empty_suite(self):
        assert success_rate([], lcbs_planner, 10.0) == 0.0


class TestSimulate:
    def test_degenerate_model_follows_plan(self):
        s = load_scenario(GOLDEN)
        s = s.replace(stochastic=degenerate_model(s.graph))
        rec = run_two_stage(s)
        ex = simulate_execution(s, rec, seed=4)
        assert ex.status == "success" and sum(ex.replans.values()) == 0
        for t, snap in enumerate(ex.positions):
            assert snap == rec.plan.positions(t)

    def test_slip_reaches_goals(self):
        s = load_scenario(GOLDEN)
        rec = run_two_stage(s)
        for seed in range(3):
            ex = simulate_execution(s, rec, seed=seed)
            assert ex.status == "success"
            assert ex.final_positions == s.goals()

    def test_trap(self):
        edges = {"A": {"B": (1,)}, "B": {"A": (1,), "C": (1,)}, "C": {"B": (1,)}, "T": {}}
        g = WorldGraph(("A", "B", "C", "T"), edges, {v: (1,) for v in edges})
        model = degenerate_model(g)
        model.tables[("A", "to:B")] = {"T": 1.0}
        s = scenario(g, [("r0", "A", "C")], stochastic=model)
        rec = RunRecord("trap", SUCCESS, InferenceTrace([], "c1", {"r0": "A"}), "c1", LexOrdering((0,)), lcbs_plan(s, LexOrdering((0,))))
        ex = simulate_execution(s, rec)
        assert ex.status == "stuck" and "T" in ex.message

    def test_needs_plan(self):
        with pytest.raises(ValueError):
            simulate_execution(_ambiguous(), RunRecord("x", AMBIGUOUS))


class TestCli:
    def test_run_golden(self, tmp_path):
        assert main(["run", str(GOLDEN), "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "summary.csv").exists() and (tmp_path / "plan.csv").exists()

    def test_ambiguous_exit(self, tmp_path):
        path = tmp_path / "amb.json"
        save_scenario(_ambiguous(), path)
        assert main(["run", str(path)]) == 2

    def test_timeout_exit(self):
        assert main(["plan", str(GOLDEN), "--context", "c1", "--budget-seconds", "0"]) == 3

    def test_input_errors(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.json")]) == 4
        assert main(["plan", str(GOLDEN)]) == 4
        assert main(["plan", str(GOLDEN), "--context", "c9"]) == 4
        bad = tmp_path / "bad.json"
        bad.write_text('{"format": 1,')
        assert main(["infer", str(bad)]) == 4

    def test_gen_is_seeded(self, tmp_path, capsys):
        argv = ["gen", "--width", "6", "--height", "6", "--robots", "2", "--landmarks", "2", "--seed", "3"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first
