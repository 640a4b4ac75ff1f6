"""Compare approx_mms bundles with exact maximin shares on small instances.

One row per advertiser: achieved influence, exact share M_i, the
c(eps) * M_i target, outer iterations that touched the advertiser and the
log_{1+lam}(I(all) / M_i) + 1 ceiling. Writes guarantee.csv under --out.
"""

import argparse
import math
from pathlib import Path

from fairslot.algorithms import AllocParams, approx_mms, valuations
from fairslot.instances import small_instance
from fairslot.io import write_csv
from fairslot.oracle import exact_mms
from fairslot.settlement import achieved_influences


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out/guarantee")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    params = AllocParams(epsilon=args.epsilon, lam=args.lam, seed=args.seed)
    rows, misses, over = [], 0, 0
    for k in range(args.instances):
        inst, ex = small_instance(args.seed * 100_003 + k, 2 + k % 9, 1 + k % 4,
                                  heterogeneous=k % 2 == 1)
        alloc, trace = approx_mms(inst, ex, params)
        shares = exact_mms(ex, valuations(inst, ex), inst.n_advertisers)
        got = achieved_influences(inst, alloc, ex)
        for i, a in enumerate(inst.advertisers):
            bound = (math.ceil(math.log(trace.full_values[i] / shares[i], 1 + args.lam)) + 1
                     if shares[i] > 0 else "")
            iters = trace.iterations_involving(i)
            ok = got[i] >= params.c * shares[i] - 1e-9
            misses += not ok
            over += bound != "" and iters > bound
            rows.append([k, inst.n_slots, inst.n_advertisers, a.id, repr(got[i]), repr(shares[i]),
                         repr(params.c * shares[i]), iters, bound, trace.status, int(ok)])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "guarantee.csv",
              ["instance", "slots", "advertisers", "advertiser_id", "influence", "share",
               "target", "iterations", "iteration_bound", "status", "meets_target"], rows)
    print(f"{len(rows)} advertisers over {args.instances} instances: "
          f"{misses} below c*M, {over} over the iteration bound")


if __name__ == "__main__":
    main()
