"""Fit one simulated dataset and print mixing diagnostics for every CMI trace.

    python3 scripts/convergence_report.py --case case1 --iters 4000 --max-lag 20
"""

import argparse

import numpy as np

from cmiscreen.cmi import autocorrelation, effective_sample_size, summarize
from cmiscreen.gibbs import ChainConfig, run_chain
from cmiscreen.model import Hyperparams
from cmiscreen.simulate import CASES, SimulationSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="case1", choices=CASES)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--thin", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-lag", type=int, default=10)
    args = ap.parse_args()

    p = 1 if args.case == "four_clouds" else 10
    data, truth = SimulationSpec(args.case, n=args.n, p=p, seed=args.seed).generate()
    out = run_chain(data, Hyperparams.from_dataset(data),
                    ChainConfig(burn_in=args.burnin, kept=args.iters, thin=args.thin, seed=args.seed))
    report = summarize(out.cmi_trace)
    lag = min(args.max_lag, len(out.cmi_trace) - 1)
    print(f"{len(out.cmi_trace)} saved draws in {out.wall_time:.1f}s; "
          f"occupied clusters (mean) {np.mean((out.occupancy > 0).sum(axis=1)):.2f}; "
          f"alpha0 (mean) {out.alpha0.mean():.3f}")
    print(f"{'j':>3} {'mean':>9} {'Pr>0':>6} {'ESS':>8}  acf lag 1..{lag}")
    for r in report.by_column():
        col = out.cmi_trace.draws[:, r.column]
        acf = autocorrelation(col, lag)[1:]
        flag = "*" if r.column in truth.dependent else " "
        print(f"{r.column + 1:>3}{flag}{r.mean:>9.4f} {r.prob_positive:>6.3f} "
              f"{effective_sample_size(col):>8.1f}  " + " ".join(f"{a:+.2f}" for a in acf))


if __name__ == "__main__":
    main()
