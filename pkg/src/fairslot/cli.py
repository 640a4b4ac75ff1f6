"""``fairslot gen|run|plot|verify``.

List-valued flags take comma-separated values; percentages such as ``100%``
are accepted for alpha and beta. ``--config FILE`` reads ``key=value`` lines
whose keys are flag names without dashes; config values win over flags.

Exit codes: 0 success, 2 a failed cell or check, 3 invalid spec.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .algorithms import ALGORITHMS, AllocParams, ConfigError, approx_mms, valuations
from .experiments import DeskSize, GridSpec, emit_plots, first_instance, run_grid
from .influence import build_exposure
from .instances import GenerationError, small_instance, toy_market
from .io import FormatError, save_instance
from .model import validate_allocation
from .oracle import exact_mms
from .settlement import achieved_influences

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 2, 3

LIST_KEYS = {"alpha": float, "beta": float, "gamma": float, "epsilon": float, "theta": float,
             "advertisers": int, "seed": int, "algo": str}
SCALAR_KEYS = {"instance": str, "out": str, "jobs": int, "lam": float, "billboards": int,
               "windows": int, "users": int, "checkins_per_user": int, "box": float,
               "base_seed": int, "trials": int}


def _number(text: str, kind):
    text = text.strip()
    if kind is float and text.endswith("%"):
        return float(text[:-1]) / 100
    return kind(text)


def parse_list(text, kind) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(_number(t, kind) for t in str(text).split(",") if t.strip())


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in LIST_KEYS and key not in SCALAR_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairslot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("gen", "generate an instance directory"),
                        ("run", "run an allocator grid and write results.csv"),
                        ("plot", "turn results.csv into series CSVs and SVG charts"),
                        ("verify", "check the maximin guarantee against the exact oracle")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key=value file overriding flags")
        sp.add_argument("--alpha", default="100%")
        sp.add_argument("--beta", default="5%")
        sp.add_argument("--gamma", default="0.5")
        sp.add_argument("--epsilon", default="0.3")
        sp.add_argument("--theta", default="100")
        sp.add_argument("--advertisers", default="",
                        help="explicit advertiser counts (beta becomes alpha/|A|)")
        sp.add_argument("--seed", default="0,1,2")
        sp.add_argument("--algo", default=",".join(ALGORITHMS))
        sp.add_argument("--instance", default="synthetic",
                        help="synthetic, toy_market, or a directory of CSVs")
        sp.add_argument("--out", default="out")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--lam", type=float, default=0.1)
        sp.add_argument("--billboards", type=int, default=100)
        sp.add_argument("--windows", type=int, default=20)
        sp.add_argument("--users", type=int, default=3000)
        sp.add_argument("--checkins-per-user", type=int, default=8)
        sp.add_argument("--box", type=float, default=2000.0, help="synthetic box side, metres")
        sp.add_argument("--base-seed", type=int, default=0)
        sp.add_argument("--trials", type=int, default=50, help="verify: number of instances")
    return p


def resolve(args: argparse.Namespace) -> dict:
    values = {k: getattr(args, k) for k in list(LIST_KEYS) + list(SCALAR_KEYS)}
    if args.config:
        values.update(read_config(args.config))
    out = {}
    for k, kind in LIST_KEYS.items():
        out[k] = parse_list(values[k], kind)
    for k, kind in SCALAR_KEYS.items():
        out[k] = kind(values[k])
    return out


def grid_from(opts: dict) -> GridSpec:
    desk = DeskSize(opts["billboards"], opts["windows"], opts["users"],
                    opts["checkins_per_user"], opts["box"], opts["base_seed"])
    spec = GridSpec(alphas=opts["alpha"], betas=opts["beta"], gammas=opts["gamma"],
                    epsilons=opts["epsilon"], thetas=opts["theta"],
                    advertisers=opts["advertisers"], seeds=opts["seed"],
                    algorithms=opts["algo"], source=opts["instance"], desk=desk,
                    lam=opts["lam"], jobs=opts["jobs"])
    problems = spec.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    return spec


def cmd_gen(opts: dict) -> int:
    inst, exposure = first_instance(grid_from(opts))
    d = save_instance(inst, opts["out"])
    print(f"wrote {d}: {inst.n_slots} slots, {len(inst.checkins)} check-ins, "
          f"{inst.n_advertisers} advertisers, supply {exposure.singletons.sum():.1f}")
    return EXIT_OK


def cmd_run(opts: dict) -> int:
    rows = run_grid(grid_from(opts), opts["out"])
    failed = [r for r in rows if str(r["status"]).startswith("error")]
    print(f"{len(rows)} rows -> {Path(opts['out']) / 'results.csv'}"
          + (f"; {len(failed)} failed" if failed else ""))
    for r in failed:
        print(f"  {r['algorithm']} seed={r['seed']}: {r['status']}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_plot(opts: dict) -> int:
    results = Path(opts["out"]) / "results.csv"
    if not results.is_file():
        print(f"{results}: not found", file=sys.stderr)
        return EXIT_FAILED
    files = emit_plots(results, Path(opts["out"]) / "plots")
    print(f"{len(files)} plot files -> {Path(opts['out']) / 'plots'}")
    return EXIT_OK


def cmd_verify(opts: dict) -> int:
    eps = opts["epsilon"][0]
    print(f"{'instance':>10} {'slots':>5} {'adv':>3} {'I(pi_i)':>9} {'M_i':>9} "
          f"{'c*M_i':>9} {'iters':>5} {'bound':>5}  result")
    failures = 0
    cases = []
    toy = toy_market()
    cases.append(("toy_market", toy, build_exposure(toy)))
    for t in range(opts["trials"]):
        seed = opts["seed"][0] * 100_003 + t
        m, n = 4 + t % 7, 1 + t % 3
        inst, exposure = small_instance(seed, m, n, heterogeneous=t % 2 == 1)
        cases.append((f"rand{t}", inst, exposure))
    for label, inst, exposure in cases:
        params = AllocParams(epsilon=eps, lam=opts["lam"], seed=opts["seed"][0])
        alloc, trace = approx_mms(inst, exposure, params)
        shares = exact_mms(exposure, valuations(inst, exposure), inst.n_advertisers)
        got = achieved_influences(inst, alloc, exposure)
        partition_ok = not validate_allocation(inst, alloc)
        for i in range(inst.n_advertisers):
            iters = trace.iterations_involving(i)
            bound = (math.ceil(math.log(trace.full_values[i] / shares[i], 1 + params.lam)) + 1
                     if shares[i] > 0 else None)
            ok = (got[i] >= params.c * shares[i] - 1e-9 and partition_ok
                  and (bound is None or iters <= bound))
            failures += not ok
            print(f"{label:>10} {inst.n_slots:>5} {i + 1:>3} {got[i]:>9.4f} {shares[i]:>9.4f} "
                  f"{params.c * shares[i]:>9.4f} {iters:>5} {bound if bound is not None else '-':>5}"
                  f"  {'PASS' if ok else 'FAIL'}")
    print(f"{'all pass' if not failures else f'{failures} failures'} "
          f"over {len(cases)} instances")
    return EXIT_OK if not failures else EXIT_FAILED


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "plot": cmd_plot, "verify": cmd_verify}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (ConfigError, GenerationError, FormatError, ValueError) as exc:
        print(f"fairslot: invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
