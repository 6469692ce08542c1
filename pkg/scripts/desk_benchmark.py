"""Desk-scale screening benchmark over the simulated cases.

    python3 scripts/desk_benchmark.py --cases case1 case3 --replications 20 --out results/
"""

import argparse
import json
import logging
import time
from pathlib import Path

from cmiscreen.evaluation import run_benchmark
from cmiscreen.fileio import json_text
from cmiscreen.gibbs import ChainConfig
from cmiscreen.simulate import CASES, SimulationSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=["case1", "case2", "case3"], choices=CASES)
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--thin", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise-sd", type=float, default=0.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("benchmark"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ChainConfig(burn_in=args.burnin, kept=args.iters, thin=args.thin, seed=args.seed)
    summary = {}
    for case in args.cases:
        p = 1 if case == "four_clouds" else 10
        mode = "marginal" if case == "four_clouds" else "conditional"
        spec = SimulationSpec(case, n=args.n, p=p, seed=args.seed, noise_sd=args.noise_sd)
        t0 = time.perf_counter()
        res = run_benchmark(spec, args.replications, cfg, mode=mode, n_jobs=args.jobs)
        rates = res.aggregate.rates()
        rates["mean_dataset_auc"] = res.mean_dataset_auc
        rates["seconds"] = time.perf_counter() - t0
        summary[case] = rates
        print(case, json.dumps({k: (round(v, 4) if v is not None else None) for k, v in rates.items()}))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(json_text({"config": vars(args) | {"out": str(args.out)},
                                                      "results": summary}))


if __name__ == "__main__":
    main()
