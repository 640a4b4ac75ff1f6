"""Parameter-sweep runner and plot-data emitter.

A grid is the cartesian product of the value lists in :class:`GridSpec`.
Each (instance, epsilon, algorithm, seed) cell yields one row of
``results.csv``; only ``runtime_ms`` depends on the machine.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import ALGORITHMS, AllocParams, ConfigError, run_algorithm
from .influence import build_exposure
from .instances import (BaseData, GenParams, generate_with_exposure, synthetic_base, toy_market)
from .io import load_billboards, load_checkins, load_instance, write_csv
from .model import validate_allocation, validate_instance
from .settlement import settle

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["alpha", "beta", "gamma", "epsilon", "theta", "n_advertisers", "seed",
                  "algorithm", "total_utility", "mean_utility", "satisfied", "empty_handed",
                  "runtime_ms", "iterations", "status"]
TIMING_COLUMNS = ("runtime_ms",)
EXPERIMENT_C_MIN = 0.01

PARAMETER_TABLE = {
    "alphas": [0.4, 0.6, 0.8, 1.0, 1.2],
    "betas": [0.01, 0.02, 0.05, 0.10, 0.20],
    "gammas": [0.0, 0.25, 0.5, 0.75, 1.0],
    "epsilons": [0.1, 0.3, 0.5, 0.7, 0.9],
    "thetas": [25.0, 50.0, 100.0, 125.0, 150.0],
}


@dataclass(frozen=True)
class DeskSize:
    n_billboards: int = 100
    n_windows: int = 20
    n_users: int = 3000
    checkins_per_user: int = 8
    box_m: float = 2000.0
    seed: int = 0


@dataclass(frozen=True)
class GridSpec:
    alphas: tuple[float, ...] = (1.0,)
    betas: tuple[float, ...] = (0.05,)
    gammas: tuple[float, ...] = (0.5,)
    epsilons: tuple[float, ...] = (0.3,)
    thetas: tuple[float, ...] = (100.0,)
    advertisers: tuple[int, ...] = ()
    seeds: tuple[int, ...] = (0, 1, 2)
    algorithms: tuple[str, ...] = ALGORITHMS
    source: str = "synthetic"
    desk: DeskSize = DeskSize()
    lam: float = 0.1
    delta_slot: float = 3600.0
    jobs: int = 1

    def __post_init__(self):
        for name in ("alphas", "betas", "gammas", "epsilons", "thetas", "advertisers", "seeds",
                     "algorithms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def validate(self) -> list[str]:
        problems = []
        for name in ("alphas", "betas", "gammas", "epsilons", "thetas", "seeds", "algorithms"):
            if not getattr(self, name):
                problems.append(f"{name} is empty")
        problems += [f"unknown algorithm {a!r}" for a in self.algorithms if a not in ALGORITHMS]
        problems += [f"alpha {a} not positive" for a in self.alphas if not a > 0]
        problems += [f"beta {b} not positive" for b in self.betas if not b > 0]
        problems += [f"gamma {g} outside [0, 1]" for g in self.gammas if not 0 <= g <= 1]
        problems += [f"epsilon {e} outside (0, 1)" for e in self.epsilons if not 0 < e < 1]
        problems += [f"theta {t} not positive" for t in self.thetas if not t > 0]
        problems += [f"advertiser count {k} < 1" for k in self.advertisers if k < 1]
        if not 0 < self.lam < 1:
            problems.append(f"lambda {self.lam} outside (0, 1)")
        if self.jobs < 1:
            problems.append("jobs must be >= 1")
        return problems

    def out_of_table(self) -> list[str]:
        """Values outside the published parameter table (allowed, but flagged)."""
        flagged = []
        for name, allowed in PARAMETER_TABLE.items():
            flagged += [f"{name[:-1]}={v}" for v in getattr(self, name)
                        if not any(math.isclose(v, a) for a in allowed)]
        return flagged


def one_at_a_time_sweep(base: GridSpec = GridSpec()) -> list[GridSpec]:
    """One-at-a-time sweep: each parameter over its table values, others at default."""
    out = []
    for name, values in PARAMETER_TABLE.items():
        out.append(replace(base, **{name: tuple(values)}))
    return out


@dataclass
class _Group:
    """Everything that shares one instance and exposure matrix."""

    source: str
    desk: DeskSize
    alpha: float
    beta: float
    gamma: float
    theta: float
    n_adv: int | None
    seed: int
    epsilons: tuple[float, ...]
    algorithms: tuple[str, ...]
    lam: float
    delta_slot: float
    rows: list = field(default_factory=list)


def _load_source(group: _Group):
    src = group.source
    if src == "toy_market":
        inst = toy_market().replace(gamma=group.gamma)
        return inst, build_exposure(inst)
    path = Path(src)
    if src != "synthetic" and (path / "instance.json").is_file():
        inst = load_instance(path).replace(gamma=group.gamma)
        return inst, build_exposure(inst)
    if src == "synthetic":
        d = group.desk
        base = synthetic_base(d.n_billboards, d.n_windows, d.n_users, d.checkins_per_user,
                              d.box_m, delta_slot=group.delta_slot, seed=d.seed)
    else:
        billboards, bad_b = load_billboards(path / "billboards.csv")
        checkins, bad_c = load_checkins(path / "checkins.csv")
        for e in bad_b + bad_c:
            log.warning("%s: skipped line %d: %s", path, e.line, e.reason)
        base = BaseData(tuple(billboards), tuple(checkins))
    params = GenParams(alpha=group.alpha, beta=group.beta, theta=group.theta,
                       delta_slot=group.delta_slot, gamma=group.gamma, seed=group.seed,
                       n_advertisers=group.n_adv)
    return generate_with_exposure(base, params)


def _fixed_source(source: str) -> bool:
    return source == "toy_market" or (Path(source) / "instance.json").is_file()


def _run_group(group: _Group) -> _Group:
    t0 = time.perf_counter()
    try:
        inst, exposure = _load_source(group)
    except Exception as exc:  # a broken cell must not stop the grid
        for eps, algo in itertools.product(group.epsilons, group.algorithms):
            group.rows.append(_row(group, eps, algo, None, None, 0.0, 0, f"error: {exc}"))
        return group
    exposure_ms = (time.perf_counter() - t0) * 1000
    supply = float(exposure.singletons.sum())
    n = inst.n_advertisers
    alpha = sum(a.demand for a in inst.advertisers) / supply if _fixed_source(group.source) \
        else group.alpha
    beta = alpha / n if (_fixed_source(group.source) or group.n_adv) else group.beta
    meta = dict(alpha=alpha, beta=beta, theta=inst.theta, n=n, exposure_ms=exposure_ms)
    problems = validate_instance(inst)
    for eps, algo in itertools.product(group.epsilons, group.algorithms):
        if problems:
            group.rows.append(_row(group, eps, algo, meta, None, 0.0, 0,
                                   f"error: invalid instance: {problems[0]}"))
            continue
        try:
            params = AllocParams(epsilon=eps, lam=group.lam, seed=group.seed,
                                 c_min=EXPERIMENT_C_MIN)
            t = time.perf_counter()
            res = run_algorithm(algo, inst, exposure, params)
            ms = (time.perf_counter() - t) * 1000
            bad = validate_allocation(inst, res.allocation)
            if bad:
                raise RuntimeError(f"invalid allocation: {bad[0]}")
            report = settle(inst, res.allocation, exposure)
            status = "ok"
            iters = 0
            if res.trace is not None:
                iters = res.trace.iterations
                if res.trace.status != "converged":
                    status = res.trace.status
                elif not params.in_theory:
                    status = "out_of_theory"
            group.rows.append(_row(group, eps, algo, meta, report, ms, iters, status))
        except Exception as exc:
            group.rows.append(_row(group, eps, algo, meta, None, 0.0, 0, f"error: {exc}"))
    return group


def _row(group, eps, algo, meta, report, ms, iters, status) -> dict:
    meta = meta or dict(alpha=group.alpha, beta=group.beta, theta=group.theta,
                        n=group.n_adv or 0, exposure_ms=0.0)
    return {
        "alpha": meta["alpha"], "beta": meta["beta"], "gamma": group.gamma, "epsilon": eps,
        "theta": meta["theta"], "n_advertisers": meta["n"], "seed": group.seed,
        "algorithm": algo,
        "total_utility": report.total_utility if report else float("nan"),
        "mean_utility": report.mean_utility if report else float("nan"),
        "satisfied": report.n_satisfied if report else 0,
        "empty_handed": report.n_empty_handed if report else 0,
        "runtime_ms": ms, "iterations": iters, "status": status,
        "_exposure_ms": meta["exposure_ms"],
    }


def _groups(spec: GridSpec) -> list[_Group]:
    common = dict(source=spec.source, desk=spec.desk, epsilons=spec.epsilons,
                  algorithms=spec.algorithms, lam=spec.lam, delta_slot=spec.delta_slot)
    if _fixed_source(spec.source):
        return [_Group(alpha=float("nan"), beta=float("nan"), gamma=g, theta=float("nan"),
                       n_adv=None, seed=s, **common)
                for g, s in itertools.product(spec.gammas, spec.seeds)]
    sizes = [(None, b) for b in spec.betas] if not spec.advertisers else \
        [(k, float("nan")) for k in spec.advertisers]
    out = []
    for a, (k, b), g, th, s in itertools.product(spec.alphas, sizes, spec.gammas,
                                                 spec.thetas, spec.seeds):
        out.append(_Group(alpha=a, beta=b if k is None else a / k, gamma=g, theta=th,
                          n_adv=k, seed=s, **common))
    return out


def first_instance(spec: GridSpec):
    """Instance and exposure of the first cell of ``spec``."""
    return _load_source(_groups(spec)[0])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_grid(spec: GridSpec, out_dir) -> list[dict]:
    """Run every cell of ``spec`` and write ``results.csv``, ``aggregates.csv``
    and ``exposure_timing.csv`` under ``out_dir``."""
    problems = spec.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    for flag in spec.out_of_table():
        log.info("out-of-table value %s", flag)
    groups = _groups(spec)
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as pool:
            done = list(pool.map(_run_group, groups))
    else:
        done = [_run_group(g) for g in groups]
    rows = [r for g in done for r in g.rows]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", RESULT_COLUMNS,
              ([_fmt(r[c]) for c in RESULT_COLUMNS] for r in rows))
    timing = []
    for g in done:
        if g.rows:
            r = g.rows[0]
            timing.append([_fmt(r["alpha"]), _fmt(r["beta"]), _fmt(r["gamma"]), _fmt(r["theta"]),
                           r["n_advertisers"], g.seed, _fmt(r["_exposure_ms"])])
    write_csv(out / "exposure_timing.csv",
              ["alpha", "beta", "gamma", "theta", "n_advertisers", "seed", "exposure_ms"], timing)
    write_aggregates(rows, out / "aggregates.csv")
    for r in rows:
        r.pop("_exposure_ms", None)
    return rows


AGG_METRICS = ("total_utility", "mean_utility", "satisfied", "empty_handed", "runtime_ms")


def write_aggregates(rows: list[dict], path) -> None:
    """Mean, min and max over seeds for each (alpha, n_advertisers, epsilon, algorithm)."""
    keyed: dict[tuple, list[dict]] = {}
    for r in rows:
        if str(r["status"]).startswith("error"):
            continue
        key = (float(r["alpha"]), int(r["n_advertisers"]), float(r["epsilon"]), r["algorithm"])
        keyed.setdefault(key, []).append(r)
    header = ["alpha", "n_advertisers", "epsilon", "algorithm", "runs"]
    for m in AGG_METRICS:
        header += [f"{m}_mean", f"{m}_min", f"{m}_max"]
    out = []
    for key in sorted(keyed):
        group = keyed[key]
        line = [_fmt(key[0]), key[1], _fmt(key[2]), key[3], len(group)]
        for m in AGG_METRICS:
            v = np.array([float(r[m]) for r in group])
            line += [_fmt(float(v.mean())), _fmt(float(v.min())), _fmt(float(v.max()))]
        out.append(line)
    write_csv(path, header, out)


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plots(results, out_dir) -> list[Path]:
    """Series CSVs and SVG line charts: utility vs advertiser count for each
    alpha, and runtime vs advertiser count. ``results`` is a path to
    ``results.csv`` or a list of row dicts."""
    rows = read_results(results) if isinstance(results, (str, Path)) else list(results)
    rows = [r for r in rows if not str(r["status"]).startswith("error")]
    if not rows:
        log.warning("no usable result rows; nothing to plot")
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def series(subset, metric):
        acc: dict[str, dict[int, list[float]]] = {}
        for r in subset:
            acc.setdefault(r["algorithm"], {}).setdefault(int(r["n_advertisers"]), []).append(
                float(r[metric]))
        return {a: sorted((n, float(np.mean(v))) for n, v in d.items()) for a, d in acc.items()}

    def chart(stem, title, ylabel, curves, extra=None):
        csv_rows = []
        for algo, pts in sorted(curves.items()):
            for n, y in pts:
                row = [algo, n, _fmt(y)]
                if extra:
                    row.append(_fmt(dict(extra[algo])[n]))
                csv_rows.append(row)
        header = ["algorithm", "n_advertisers", ylabel] + (["mean_utility"] if extra else [])
        write_csv(out / f"{stem}.csv", header, csv_rows)
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for algo, pts in sorted(curves.items()):
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=algo)
        ax.set_xlabel("|A|")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / f"{stem}.svg", format="svg")
        plt.close(fig)
        written.extend([out / f"{stem}.csv", out / f"{stem}.svg"])

    alphas = sorted({float(r["alpha"]) for r in rows})
    for a in alphas:
        subset = [r for r in rows if float(r["alpha"]) == a]
        chart(f"utility_alpha_{a:g}", f"utility, alpha={a:g}", "total_utility",
              series(subset, "total_utility"), series(subset, "mean_utility"))
    chart("runtime", "allocation runtime", "runtime_ms", series(rows, "runtime_ms"))
    return written
