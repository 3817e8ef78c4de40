"""Command-line entry point: gen, infer, plan, run, bench, simulate."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .cimop import run_cimop
from .core import slip_model
from .errors import (
    AmbiguousContext,
    AssignmentInfeasible,
    GenerationError,
    InconsistentObservation,
    OracleGuardError,
    PlanInfeasible,
    PlanTimeout,
    SamplingError,
    ScenarioError,
    TransitInfeasible,
)
from .belief import entropy
from .generate import FLAVORS, GenParams, generate
from .harness import (
    SUCCESS,
    TIMEOUT,
    bench,
    emit_metrics,
    lcbs_planner,
    run_two_stage,
    scalarized_planner,
    simulate_execution,
)
from .lcbs import lcbs_plan
from .scenario_io import ScenarioFormatError, dumps_scenario, load_scenario

EXIT_OK, EXIT_INFEASIBLE, EXIT_TIMEOUT, EXIT_INPUT = 0, 2, 3, 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="single source of randomness")
    p.add_argument("--budget-seconds", type=float, default=None, help="wall-clock budget for plan search")
    p.add_argument("--horizon-slack", type=float, default=2.0, help="low-level horizon multiplier on |V|")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxplan", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a scenario file")
    _add_common(g)
    defaults = GenParams()
    g.add_argument("--flavor", choices=FLAVORS, default=defaults.flavor)
    for name in ("width", "height", "robots", "landmarks", "contexts", "objectives", "max_team"):
        g.add_argument(f"--{name.replace('_', '-')}", type=int, default=getattr(defaults, name))
    g.add_argument("--redundant-fraction", type=float, default=defaults.redundant_fraction)
    g.add_argument("--obstacle-density", type=float, default=defaults.obstacle_density)
    g.add_argument("--slip", type=float, default=defaults.slip)
    g.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")

    for name, text in (("infer", "stage one only"), ("run", "both stages"), ("simulate", "both stages, then stochastic execution")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", type=Path)
        _add_common(p)
        p.add_argument("--out-dir", type=Path, default=None)
        if name == "simulate":
            p.add_argument("--slip", type=float, default=None, help="override the scenario's stochastic model")

    p = sub.add_parser("plan", help="stage two only")
    p.add_argument("scenario", type=Path)
    _add_common(p)
    p.add_argument("--context", default=None, help="context whose ordering to plan under")

    b = sub.add_parser("bench", help="run planners over a directory of scenarios")
    b.add_argument("instances", type=Path)
    _add_common(b)
    b.add_argument("--planners", default="lcbs,scalarized")
    b.add_argument("--oracle", action="store_true")
    b.add_argument("--m-mode", choices=("domain", "instance"), default="domain")
    b.add_argument("--out", type=Path, default=None)
    return parser


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _cmd_gen(a) -> int:
    fields = {f.name for f in dataclasses.fields(GenParams)}
    params = GenParams(**{k: v for k, v in vars(a).items() if k in fields})
    _emit(dumps_scenario(generate(params)) + "\n", a.out)
    return EXIT_OK


def _cmd_infer(a) -> int:
    s = load_scenario(a.scenario)
    trace, cid, ordering = run_cimop(s)
    csv_text = trace.to_csv()
    if a.out_dir:
        a.out_dir.mkdir(parents=True, exist_ok=True)
        (a.out_dir / f"{s.id}.trace.csv").write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    print(f"inferred {cid} ordering {ordering.names(s.objectives)}", file=sys.stderr)
    return EXIT_OK


def _cmd_plan(a) -> int:
    s = load_scenario(a.scenario)
    cid = a.context
    if cid is None:
        if entropy(s.initial_belief) != 0:
            print("plan needs --context unless the initial belief is collapsed", file=sys.stderr)
            return EXIT_INPUT
        cid = s.initial_belief.argmax()
    if cid not in s.context_ids:
        print(f"unknown context {cid!r}", file=sys.stderr)
        return EXIT_INPUT
    plan = lcbs_plan(s, s.ordering(cid), budget=a.budget_seconds, horizon_slack=a.horizon_slack)
    sys.stdout.write(plan.to_csv())
    return EXIT_OK


def _record_exit(rec) -> int:
    if rec.status == SUCCESS:
        return EXIT_OK
    if rec.status == TIMEOUT:
        return EXIT_TIMEOUT
    return EXIT_INFEASIBLE


def _cmd_run(a) -> int:
    s = load_scenario(a.scenario)
    rec = run_two_stage(s, a.budget_seconds, horizon_slack=a.horizon_slack)
    tables = emit_metrics([rec])
    if a.out_dir:
        a.out_dir.mkdir(parents=True, exist_ok=True)
        (a.out_dir / "summary.csv").write_text(tables["summary"], encoding="utf-8")
        (a.out_dir / "entropy.csv").write_text(tables["entropy"], encoding="utf-8")
        if rec.plan is not None:
            (a.out_dir / "plan.csv").write_text(rec.plan.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(tables["summary"])
    if rec.message:
        print(rec.message, file=sys.stderr)
    return _record_exit(rec)


def _cmd_simulate(a) -> int:
    s = load_scenario(a.scenario)
    if a.slip is not None:
        s = s.replace(stochastic=slip_model(s.graph, a.slip))
    rec = run_two_stage(s, a.budget_seconds, horizon_slack=a.horizon_slack)
    if rec.status != SUCCESS:
        print(rec.message, file=sys.stderr)
        return _record_exit(rec)
    ex = simulate_execution(s, rec, a.seed)
    lines = ["robot,replans,final_vertex,at_goal"]
    goals = s.goals()
    for r in sorted(ex.replans):
        lines.append(f"{r},{ex.replans[r]},{ex.final_positions[r]},{int(ex.final_positions[r] == goals[r])}")
    _emit("\n".join(lines) + "\n", (a.out_dir / "execution.csv") if a.out_dir else None)
    print(f"execution {ex.status} after {ex.steps} steps {ex.message}".rstrip(), file=sys.stderr)
    return EXIT_OK if ex.status == "success" else EXIT_INFEASIBLE


def _cmd_bench(a) -> int:
    paths = sorted(a.instances.glob("*.json")) if a.instances.is_dir() else [a.instances]
    if not paths:
        print(f"no scenario files under {a.instances}", file=sys.stderr)
        return EXIT_INPUT
    available = {"lcbs": lcbs_planner, "scalarized": scalarized_planner(a.m_mode, seed=a.seed)}
    names = [n.strip() for n in a.planners.split(",") if n.strip()]
    unknown = [n for n in names if n not in available]
    if unknown:
        print(f"unknown planners {unknown}; choose from {sorted(available)}", file=sys.stderr)
        return EXIT_INPUT
    instances = [load_scenario(p) for p in paths]
    _emit(bench(instances, {n: available[n] for n in names}, a.budget_seconds, a.oracle), a.out)
    return EXIT_OK


COMMANDS = {
    "gen": _cmd_gen,
    "infer": _cmd_infer,
    "plan": _cmd_plan,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return COMMANDS[a.cmd](a)
    except PlanTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (PlanInfeasible, AmbiguousContext, TransitInfeasible, AssignmentInfeasible, InconsistentObservation) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ScenarioFormatError, ScenarioError, GenerationError, OracleGuardError, SamplingError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
