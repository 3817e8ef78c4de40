"""Success rate of LCBS and scalarized CBS under shrinking time budgets.

The suite holds five small instances per domain flavor plus the engineered
instance on which a moderate scalarization base picks the wrong path. Oracle
costs are computed once and reused for every budget.

    python3 scripts/budget_sweep.py --budgets 120,60,30,10,5
"""
import argparse
import csv
import dataclasses
import sys

from ctxplan.errors import GenerationError
from ctxplan.generate import FLAVORS, GenParams, generate, m_violation_instance
from ctxplan.harness import lcbs_planner, oracle_cost, scalarized_planner, success_rate


def build_suite(per_flavor: int, seed: int, width: int, height: int, robots: int):
    suite, k = [], seed
    while len(suite) < per_flavor * len(FLAVORS):
        flavor = FLAVORS[len(suite) % len(FLAVORS)]
        try:
            suite.append(generate(GenParams(flavor, width, height, robots=robots, landmarks=1, obstacle_density=0.0, seed=k)))
        except GenerationError:
            pass
        k += 1
    suite.append(m_violation_instance())
    return [dataclasses.replace(s, id=f"{s.id}#{i}") for i, s in enumerate(suite)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=5000)
    ap.add_argument("--per-flavor", type=int, default=5)
    ap.add_argument("--width", type=int, default=5)
    ap.add_argument("--height", type=int, default=6)
    ap.add_argument("--robots", type=int, default=5)
    ap.add_argument("--budgets", default="120,60,30,10,5")
    ap.add_argument("--m-mode", choices=["domain", "instance"], default="domain")
    ap.add_argument("--out", default=None)
    a = ap.parse_args(argv)

    suite = build_suite(a.per_flavor, a.seed, a.width, a.height, a.robots)
    oracle = {s.id: oracle_cost(s) for s in suite}
    planners = {"lcbs": lcbs_planner, "scalarized": scalarized_planner(a.m_mode, seed=a.seed)}
    out = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["budget_s", "planner", "success_rate", "instances"])
    for b in (float(x) for x in a.budgets.split(",")):
        for name, planner in planners.items():
            w.writerow([b, name, f"{success_rate(suite, planner, b, oracle):.4f}", len(suite)])
    if a.out:
        out.close()


if __name__ == "__main__":
    main()
