"""Two-stage pipeline, stochastic execution with repair, metrics and benchmarking."""
from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass
from statistics import mean
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .baselines import ScalarWeights, brute_force_lex_oracle, estimate_M, scalarized_cbs
from .cimop import InferenceTrace, run_cimop
from .core import LexOrdering, Scenario, action_name, degenerate_model
from .errors import (
    AmbiguousContext,
    AssignmentInfeasible,
    InconsistentObservation,
    OracleGuardError,
    PlanInfeasible,
    PlanTimeout,
    TransitInfeasible,
)
from .lcbs import Constraint, JointPlan, detect_first_conflict, la_star, lcbs_plan

SUCCESS, AMBIGUOUS, INFEASIBLE, TIMEOUT = "success", "ambiguous", "infeasible", "timeout"
STATUSES = (SUCCESS, AMBIGUOUS, INFEASIBLE, TIMEOUT)


@dataclass
class RunRecord:
    scenario_id: str
    status: str
    trace: Optional[InferenceTrace] = None
    inferred: Optional[str] = None
    ordering: Optional[LexOrdering] = None
    plan: Optional[JointPlan] = None
    stage1_ms: float = 0.0
    stage2_ms: float = 0.0
    true_context: Optional[str] = None
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.plan is not None and self.trace is None:
            raise ValueError("a stage-two plan requires a stage-one trace")


def _status_of(exc: Exception) -> str:
    if isinstance(exc, PlanTimeout):
        return TIMEOUT
    if isinstance(exc, (AmbiguousContext, InconsistentObservation)):
        return AMBIGUOUS
    return INFEASIBLE


def run_two_stage(
    s: Scenario,
    budget: Optional[float] = None,
    *,
    horizon_slack: float = 2.0,
    heuristic: str = "euclidean",
) -> RunRecord:
    """Infer the context, then plan from where inference left the robots.

    ``budget`` bounds the stage-two search in seconds.
    """
    t0 = time.perf_counter()
    try:
        trace, cid, ordering = run_cimop(s)
    except (AmbiguousContext, InconsistentObservation, TransitInfeasible, AssignmentInfeasible, PlanTimeout) as exc:
        ms = (time.perf_counter() - t0) * 1000
        return RunRecord(s.id, _status_of(exc), stage1_ms=ms, true_context=s.true_context, message=str(exc))
    t1 = time.perf_counter()
    rec = RunRecord(s.id, SUCCESS, trace, cid, ordering, stage1_ms=(t1 - t0) * 1000, true_context=s.true_context)
    try:
        rec.plan = lcbs_plan(s, ordering, starts=trace.final_positions, budget=budget, heuristic=heuristic, horizon_slack=horizon_slack)
    except (PlanInfeasible, PlanTimeout) as exc:
        rec.status = _status_of(exc)
        rec.message = str(exc)
    rec.stage2_ms = (time.perf_counter() - t1) * 1000
    return rec


# ---------------------------------------------------------------------------
# execution under a stochastic model

EXEC_SUCCESS, EXEC_REPLAN_LIMIT, EXEC_STUCK = "success", "replan-limit", "stuck"


@dataclass
class ExecutionTrace:
    status: str
    positions: list  # per timestep: {robot: vertex}
    replans: dict
    cost: dict
    message: str = ""

    @property
    def final_positions(self) -> dict:
        return self.positions[-1]

    @property
    def steps(self) -> int:
        return len(self.positions) - 1


def _resolve_collisions(current: Mapping, proposed: dict) -> set:
    """Make robots whose proposed moves collide stay put; return those reverted."""
    reverted = set()
    while True:
        clash = set()
        owner: dict = {}
        for r, v in proposed.items():
            if v in owner:
                clash.update((r, owner[v]))
            owner.setdefault(v, r)
        for r, v in proposed.items():
            o = owner.get(current[r])
            if o is not None and o != r and v == current[o] and v != current[r]:
                clash.update((r, o))
        clash = {r for r in clash if proposed[r] != current[r]}
        if not clash:
            return reverted
        for r in clash:
            proposed[r] = current[r]
        reverted |= clash


def _repair(s: Scenario, robot: str, at, now: int, committed: Mapping[str, list], goal, order: LexOrdering):
    """LA* for ``robot`` from ``at`` at ``now``, avoiding others' committed futures."""
    constraints, blocked = [], {}
    for other, path in committed.items():
        if other == robot:
            continue
        end = len(path) - 1
        for t in range(now, end + 1):
            rel = t - now
            constraints.append(Constraint.vertex(robot, path[t], rel))
            if t < end:
                constraints.append(Constraint.edge(robot, path[t + 1], path[t], rel))
        if end < now:
            blocked[path[end]] = 0
        else:
            blocked[path[end]] = min(blocked.get(path[end], end - now), end - now)
    return la_star(s.graph, at, goal, order, constraints=constraints, blocked=blocked)


def simulate_execution(
    s: Scenario,
    rec: RunRecord,
    seed: int = 0,
    *,
    ordering: Optional[LexOrdering] = None,
    max_replans: int = 50,
    max_steps: Optional[int] = None,
    full_replan: bool = True,
    replan_budget: Optional[float] = 10.0,
) -> ExecutionTrace:
    """Execute ``rec.plan`` with sampled outcomes, repairing off-plan robots.

    Moves that would collide are cancelled (the robot waits). A robot that
    ends up off its committed path is replanned with LA* against the other
    robots' committed paths. When that fails and ``full_replan`` is set, all
    robots are replanned jointly with LCBS from where they stand.
    """
    if rec.plan is None:
        raise ValueError("record has no plan to execute")
    model = s.stochastic or degenerate_model(s.graph)
    order = ordering or rec.ordering or LexOrdering.identity(s.objectives.count)
    rng = random.Random(seed)
    goals = s.goals()
    committed = {r: list(p) for r, p in rec.plan.paths.items()}
    pos = {r: p[0] for r, p in committed.items()}
    history = [dict(pos)]
    replans = {r: 0 for r in committed}
    cost = {r: (0,) * s.objectives.count for r in committed}
    if max_steps is None:
        max_steps = 4 * (rec.plan.makespan + len(s.graph.vertices))
    now = 0

    def add(r, c):
        cost[r] = tuple(a + b for a, b in zip(cost[r], c))

    while True:
        if all(pos[r] == goals[r] and now >= len(committed[r]) - 1 for r in committed):
            return ExecutionTrace(EXEC_SUCCESS, history, replans, cost)
        if now >= max_steps:
            return ExecutionTrace(EXEC_STUCK, history, replans, cost, f"no completion within {max_steps} steps at {pos}")
        intended, proposed, actions = {}, {}, {}
        for r in sorted(committed):
            path = committed[r]
            nxt = path[now + 1] if now + 1 < len(path) else path[-1]
            intended[r] = nxt
            a = action_name(pos[r], nxt)
            actions[r] = a
            table = model.tables[(pos[r], a)]
            succ = sorted(table, key=str)
            proposed[r] = rng.choices(succ, weights=[table[u] for u in succ])[0]
        reverted = _resolve_collisions(pos, proposed)
        for r in committed:
            if r in reverted:
                add(r, s.graph.wait_costs[pos[r]])
            else:
                add(r, model.costs[(pos[r], actions[r])])
        pos = proposed
        now += 1
        history.append(dict(pos))
        off = sorted(r for r in committed if pos[r] != intended[r])
        for r in off:
            replans[r] += 1
            if replans[r] > max_replans:
                return ExecutionTrace(EXEC_REPLAN_LIMIT, history, replans, cost, f"robot {r} exceeded {max_replans} replans")
            fixed = _repair(s, r, pos[r], now, committed, goals[r], order)
            if fixed is not None:
                committed[r] = committed[r][:now] + list(fixed.vertices)
                continue
            joint = None
            if full_replan:
                try:
                    joint = lcbs_plan(s, order, starts=pos, budget=replan_budget)
                except (PlanInfeasible, PlanTimeout):
                    joint = None
            if joint is None:
                return ExecutionTrace(EXEC_STUCK, history, replans, cost, f"robot {r} cannot be repaired from {pos[r]} (positions {pos})")
            for q in committed:
                committed[q] = committed[q][:now] + list(joint.paths[q])
            for q in off:
                if q > r:
                    replans[q] += 1
            break
        if off:
            assert detect_first_conflict({r: p[now:] or p[-1:] for r, p in committed.items()}) is None


# ---------------------------------------------------------------------------
# metrics


SUMMARY_FIELDS = ["scenario", "status", "true_context", "inferred", "cumulative_entropy", "steps_to_collapse", "stage1_ms", "stage2_ms", "cost"]


def emit_metrics(records: Sequence[RunRecord]) -> dict:
    """CSV tables: ``summary`` (one row per run plus a mean row) and ``entropy`` (trajectories)."""
    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    traj = io.StringIO()
    tw = csv.writer(traj, lineterminator="\n")
    tw.writerow(["scenario", "step", "entropy"])
    rows = []
    for rec in records:
        trace = rec.trace
        cum = trace.cumulative_entropy if trace else ""
        steps = trace.total_steps if trace else ""
        cost = ";".join(str(x) for x in rec.plan.cost) if rec.plan else ""
        row = [rec.scenario_id, rec.status, rec.true_context or "", rec.inferred or "", cum, steps, f"{rec.stage1_ms:.3f}", f"{rec.stage2_ms:.3f}", cost]
        rows.append(row)
        w.writerow(row)
        if trace:
            for st in trace.steps:
                tw.writerow([rec.scenario_id, st.step, st.entropy])
    if rows:
        def avg(col):
            vals = [float(r[col]) for r in rows if r[col] != ""]
            return f"{mean(vals):.3f}" if vals else ""

        ok = sum(1 for r in records if r.status == SUCCESS)
        w.writerow(["mean", f"{ok}/{len(rows)}", "", "", avg(4), avg(5), avg(6), avg(7), ""])
    return {"summary": summary.getvalue(), "entropy": traj.getvalue()}


# ---------------------------------------------------------------------------
# planners, oracle and success rate

Planner = Callable[[Scenario, Optional[float]], JointPlan]


def lcbs_planner(s: Scenario, budget: Optional[float]) -> JointPlan:
    return lcbs_plan(s, s.ordering(s.true_context), budget=budget)


def scalarized_planner(M_mode: str = "domain", samples: int = 50, seed: int = 0) -> Planner:
    """Scalarized CBS with ``M`` estimated once per domain flavor, or per instance."""
    if M_mode not in ("domain", "instance"):
        raise ValueError("M_mode must be 'domain' or 'instance'")
    per_domain: dict = {}

    def plan(s: Scenario, budget: Optional[float]) -> JointPlan:
        order = s.ordering(s.true_context)
        if "M" in s.meta:
            weights = ScalarWeights(s.meta["M"], order.priority)
        elif M_mode == "instance":
            weights = estimate_M(s, order, samples, seed)
        else:
            flavor = s.meta.get("params", {}).get("flavor", s.id)
            if flavor not in per_domain:
                per_domain[flavor] = estimate_M(s, order, samples, seed).M
            weights = ScalarWeights(per_domain[flavor], order.priority)
        return scalarized_cbs(s, weights, budget)

    return plan


def oracle_cost(s: Scenario, horizon: int = 16) -> tuple:
    return brute_force_lex_oracle(s, s.ordering(s.true_context), horizon)[0]


def success_rate(
    instances: Sequence[Scenario],
    planner: Planner,
    budget_seconds: float,
    oracle: Callable[[Scenario], tuple] | Mapping[str, tuple] = oracle_cost,
) -> float:
    """Fraction of instances solved within budget with a cost equal to the oracle's lex-min."""
    if not instances:
        return 0.0
    wins = 0
    for s in instances:
        want = oracle[s.id] if isinstance(oracle, Mapping) else oracle(s)
        t0 = time.perf_counter()
        try:
            plan = planner(s, budget_seconds)
        except (PlanTimeout, PlanInfeasible):
            continue
        if time.perf_counter() - t0 <= budget_seconds and tuple(plan.cost) == tuple(want):
            wins += 1
    return wins / len(instances)


def bench(
    instances: Iterable[Scenario],
    planners: Mapping[str, Planner],
    budget: Optional[float],
    with_oracle: bool = False,
) -> str:
    """CSV rows ``instance, planner, c_1..c_n, wall_ms, status`` for every planner on every instance."""
    instances = list(instances)
    n = max((s.objectives.count for s in instances), default=0)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["instance", "planner"] + [f"c_{i + 1}" for i in range(n)] + ["wall_ms", "status"])
    runs = dict(planners)
    if with_oracle:
        runs["oracle"] = lambda s, b: brute_force_lex_oracle(s, s.ordering(s.true_context))[1]
    for s in instances:
        for name, planner in runs.items():
            t0 = time.perf_counter()
            cost, status = [""] * n, SUCCESS
            try:
                plan = planner(s, budget)
                cost = list(plan.cost) + [""] * (n - len(plan.cost))
            except Exception as exc:  # recorded, not raised: one bad instance must not end the sweep
                if isinstance(exc, OracleGuardError):
                    status = "refused"
                elif isinstance(exc, (PlanTimeout, PlanInfeasible)):
                    status = _status_of(exc)
                else:
                    status = f"error:{type(exc).__name__}"
            w.writerow([s.id, name] + cost + [f"{(time.perf_counter() - t0) * 1000:.3f}", status])
    return out.getvalue()
