"""Utility and satisfaction as the market tightens.

Runs every allocator over alpha x advertiser-count on the synthetic desk
instance and writes results.csv, aggregates.csv and the per-alpha utility
charts under --out.
"""

import argparse
import logging
from collections import defaultdict

import numpy as np

from fairslot.experiments import GridSpec, emit_plots, run_grid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out/alpha_sweep")
    p.add_argument("--alphas", default="0.4,0.6,0.8,1.0,1.2")
    p.add_argument("--advertisers", default="10,20,50,100")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    spec = GridSpec(alphas=tuple(float(a) for a in args.alphas.split(",")),
                    advertisers=tuple(int(k) for k in args.advertisers.split(",")),
                    seeds=tuple(int(s) for s in args.seeds.split(",")), jobs=args.jobs)
    rows = run_grid(spec, args.out)
    emit_plots(rows, f"{args.out}/plots")

    table = defaultdict(list)
    for r in rows:
        table[(r["alpha"], r["algorithm"])].append(r)
    print(f"{'alpha':>6} {'algorithm':>9} {'mean utility':>13} {'satisfied':>10} {'empty':>6}")
    for (alpha, algo), rs in sorted(table.items()):
        print(f"{alpha:>6g} {algo:>9} {np.mean([r['mean_utility'] for r in rs]):>13.1f} "
              f"{np.mean([r['satisfied'] / r['n_advertisers'] for r in rs]):>10.0%} "
              f"{np.mean([r['empty_handed'] for r in rs]):>6.1f}")


if __name__ == "__main__":
    main()
