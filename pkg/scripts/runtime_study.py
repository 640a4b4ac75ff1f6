"""Allocation wall-clock against advertiser count and epsilon.

Times are best-of-``--repeats`` per cell; exposure construction is excluded.
Writes runtime.csv under --out.
"""

import argparse
import math
import time
from pathlib import Path

from fairslot.algorithms import AllocParams, run_algorithm
from fairslot.instances import GenParams, generate_with_exposure, synthetic_base
from fairslot.io import write_csv


def best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best * 1000


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out/runtime")
    p.add_argument("--advertisers", default="10,20,50,100")
    p.add_argument("--epsilons", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    base = synthetic_base()
    rows = []
    for k in (int(x) for x in args.advertisers.split(",")):
        for seed in (int(s) for s in args.seeds.split(",")):
            inst, ex = generate_with_exposure(base, GenParams(alpha=1.0, n_advertisers=k, seed=seed))
            for eps in (float(e) for e in args.epsilons.split(",")):
                params = AllocParams(epsilon=eps, seed=seed, c_min=0.01)
                algos = ("mms", "greedy", "random", "topk") if eps == 0.3 else ("mms",)
                for algo in algos:
                    ms = best_of(lambda: run_algorithm(algo, inst, ex, params), args.repeats)
                    rows.append([k, seed, eps, algo, f"{ms:.3f}"])
                    print(f"|A|={k:>3} seed={seed} eps={eps:.1f} {algo:>6} {ms:9.1f} ms")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "runtime.csv", ["n_advertisers", "seed", "epsilon", "algorithm", "runtime_ms"],
              rows)


if __name__ == "__main__":
    main()
