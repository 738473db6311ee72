"""Random-MDP survey of Jacobi vs plain splitting: rates, condition numbers, optimal steps.

    python scripts/theory_suite.py --instances 1000 --out runs/theory_suite
"""

import argparse
import os
import time

import numpy as np

from tdprop_lab.mdp import sample_instances
from tdprop_lab.precond import Variant, analysis_row, analyze, theorem2_check, write_analysis_csv

VARIANTS = ["td0", "nstep:2", "nstep:5", "lambda:0.5", "lambda:0.9"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=1000)
    ap.add_argument("--symmetric-instances", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/theory_suite")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    t0 = time.perf_counter()
    rows, gaps = [], []
    for seed, m in sample_instances(args.seed, args.instances, (3, 20), (0.5, 0.9, 0.99)):
        for text in VARIANTS:
            v = Variant.parse(text)
            a = analyze(m, v)
            ok = a.rho_jacobi <= a.rho_plain + 1e-10 and a.rho_plain < 1
            rows.append(analysis_row(v, m.gamma, m.n_states, seed, a, ok))
            gaps.append(a.rho_plain - a.rho_jacobi)
    write_analysis_csv(os.path.join(args.out, "random.csv"), rows)
    gaps = np.array(gaps)
    print(f"{len(rows)} (MDP, variant) pairs in {time.perf_counter() - t0:.1f} s; "
          f"violations {sum(r['theorem1_holds'] == 'false' for r in rows)}")
    print(f"rho_plain - rho_jacobi: min {gaps.min():.3e}  median {np.median(gaps):.3e}  max {gaps.max():.3e}")

    ratios = []
    for seed, m in sample_instances(args.seed + 1, args.symmetric_instances, (2, 16), (0.9, 0.99), symmetric=True):
        rep = theorem2_check(m)
        ratios.append(rep.kappa_jacobi / rep.kappa_plain)
    ratios = np.array(ratios)
    print(f"symmetric: kappa_jacobi / kappa_plain  median {np.median(ratios):.4f}  max {ratios.max():.4f}"
          f"  (bound 2)")


if __name__ == "__main__":
    main()
