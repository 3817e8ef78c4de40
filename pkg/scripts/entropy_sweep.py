"""Cumulative entropy of CIMOP and the random baseline versus redundant-landmark fraction.

Writes one CSV row per (fraction, seed) and a mean row per fraction.

    python3 scripts/entropy_sweep.py --seeds 20 --out entropy_sweep.csv
"""
import argparse
import csv
import sys
from statistics import mean

from ctxplan.baselines import random_inference_baseline
from ctxplan.cimop import run_cimop
from ctxplan.generate import FLAVORS, GenParams, generate_retry


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=4000, help="first instance seed")
    ap.add_argument("--seeds", type=int, default=20, help="instances per fraction")
    ap.add_argument("--fractions", default="0,0.25,0.5,0.75")
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--robots", type=int, default=5)
    ap.add_argument("--landmarks", type=int, default=8)
    ap.add_argument("--contexts", type=int, default=3)
    ap.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    a = ap.parse_args(argv)

    out = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["fraction", "instance", "cimop_cumulative", "baseline_cumulative", "cimop_visits", "baseline_visits"])
    for frac in (float(x) for x in a.fractions.split(",")):
        ours, base = [], []
        for k in range(a.seeds):
            p = GenParams(FLAVORS[k % 3], a.size, a.size, robots=a.robots, landmarks=a.landmarks,
                          contexts=a.contexts, redundant_fraction=frac, seed=a.seed + k)
            s = generate_retry(p)
            t1, _, _ = run_cimop(s)
            t2 = random_inference_baseline(s, a.seed + k)
            ours.append(t1.cumulative_entropy)
            base.append(t2.cumulative_entropy)
            w.writerow([frac, s.id, t1.cumulative_entropy, t2.cumulative_entropy, len(t1.visited), len(t2.visited)])
        w.writerow([frac, "mean", f"{mean(ours):.3f}", f"{mean(base):.3f}", "", ""])
    if a.out:
        out.close()


if __name__ == "__main__":
    main()
