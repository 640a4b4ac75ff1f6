"""Threshold round-robin, approximate maximin-share allocation, and baselines.

All allocators return a complete partition of the slots. Ties on marginal
gain go to the lowest slot position; randomness comes from per-advertiser
streams derived from ``(seed, advertiser, iteration)`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .influence import ExposureMatrix, InfluenceState, InvalidInput, influence
from .model import Allocation, Instance

SEED_MASK = (1 << 64) - 1
THEORY_EPS_BOUND = 1.0 - math.exp(-1.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AllocParams:
    """Knobs shared by the round-robin allocators.

    ``c_min`` switches on experiment mode: the approximation constant is
    clamped to at least ``c_min`` so that epsilons past 1 - 1/e still run.
    """

    epsilon: float = 0.3
    lam: float = 0.1
    seed: int = 0
    delta_floor_ratio: float = 1e-9
    c_min: float | None = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon={self.epsilon} must lie in (0, 1)")
        if not 0 < self.lam < 1:
            raise ConfigError(f"lambda={self.lam} must lie in (0, 1)")
        if not 0 < self.delta_floor_ratio < 1:
            raise ConfigError(f"delta_floor_ratio={self.delta_floor_ratio} must lie in (0, 1)")

    @property
    def c(self) -> float:
        return threshold_constant(self.epsilon, self.c_min)

    @property
    def in_theory(self) -> bool:
        return self.epsilon < THEORY_EPS_BOUND


def threshold_constant(epsilon: float, c_min: float | None = None) -> float:
    """(1 - 1/e - epsilon) / 3, the per-advertiser guarantee factor."""
    c = (1.0 - math.exp(-1.0) - epsilon) / 3.0
    if c_min is not None:
        return max(c, c_min)
    if c <= 0:
        raise ConfigError(f"epsilon={epsilon} >= 1 - 1/e ~ {THEORY_EPS_BOUND:.4f} makes the "
                          "guarantee constant nonpositive; set c_min to run anyway")
    return c


def sample_size(remaining_slots: int, remaining_advertisers: int, epsilon: float) -> int:
    k = math.ceil(remaining_slots / remaining_advertisers * math.log(1.0 / epsilon))
    return min(remaining_slots, max(1, k))


def advertiser_rng(seed: int, advertiser: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed & SEED_MASK, advertiser, iteration])


def valuations(instance: Instance, exposure: ExposureMatrix) -> list[ExposureMatrix]:
    """Per-advertiser valuation matrices (the shared one unless scaled)."""
    cache: dict[float, ExposureMatrix] = {}
    out = []
    for a in instance.advertisers:
        if a.influence_scale not in cache:
            cache[a.influence_scale] = exposure.scaled(a.influence_scale)
        out.append(cache[a.influence_scale])
    return out


class _Pool:
    """Remaining slots with O(1) removal and uniform sampling."""

    def __init__(self, slots: np.ndarray, n_total: int):
        self.items = np.array(slots, dtype=np.int64)
        self.size = len(self.items)
        self.where = np.full(n_total, -1, dtype=np.int64)
        self.where[self.items] = np.arange(self.size)

    def __len__(self):
        return self.size

    def remove(self, slot: int) -> None:
        k = self.where[slot]
        last = self.items[self.size - 1]
        self.items[k] = last
        self.where[last] = k
        self.where[slot] = -1
        self.size -= 1

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        live = self.items[: self.size]
        if k >= self.size:
            return np.sort(live)
        return np.sort(live[rng.choice(self.size, size=k, replace=False)])

    def sorted(self) -> np.ndarray:
        return np.sort(self.items[: self.size])


def _gains(state: InfluenceState, cand: np.ndarray) -> np.ndarray:
    if len(cand) <= 16:
        return np.array([state.marginal_gain(s) for s in cand])
    return state.marginal_gains(cand)


@dataclass
class _RoundRobinResult:
    bundles: list[list[int]]
    phases: dict[int, str]
    achieved: list[float]


def _round_robin(vals: Sequence[ExposureMatrix], thresholds: Sequence[float], c: float,
                 epsilon: float, seed: int, iteration: int,
                 active: Sequence[int]) -> _RoundRobinResult:
    n = len(vals)
    m = vals[0].n_slots if vals else 0
    states = [InfluenceState(v) for v in vals]
    bundles: list[list[int]] = [[] for _ in range(n)]
    phases: dict[int, str] = {}
    remaining = np.ones(m, dtype=bool)

    def give(i, s, phase):
        states[i].add_slot(int(s))
        bundles[i].append(int(s))
        phases[int(s)] = phase
        remaining[s] = False

    # singleton phase: advertisers by index, first qualifying slot by position.
    # One pass suffices: removing slots never makes a skipped advertiser qualify.
    rest = []
    for i in active:
        ok = np.flatnonzero(remaining & (vals[i].singletons >= c * thresholds[i]))
        if len(ok):
            give(i, ok[0], "singleton")
        else:
            rest.append(i)

    pool = _Pool(np.flatnonzero(remaining), m)
    rngs = {i: advertiser_rng(seed, i, iteration) for i in rest}
    while len(pool) and rest:
        for i in rest:
            if not len(pool):
                break
            cand = pool.sample(rngs[i], sample_size(len(pool), len(rest), epsilon))
            g = int(cand[np.argmax(_gains(states[i], cand))])
            give(i, g, "round_robin")
            pool.remove(g)

    # leftovers (everyone got a singleton): deal over all advertisers in index order
    for k, s in enumerate(pool.sorted()):
        give(k % n, s, "leftover")
    return _RoundRobinResult(bundles, phases, [st.total for st in states])


def round_robin(instance: Instance, exposure: ExposureMatrix, thresholds: Sequence[float],
                params: AllocParams, *, iteration: int = 0,
                active: Sequence[int] | None = None) -> Allocation:
    """Singleton phase at threshold ``c(eps) * delta_i``, then sampled round-robin.

    ``active`` restricts the first two phases to a subset of advertisers;
    leftover slots are still dealt to every advertiser.
    """
    if instance.n_advertisers == 0:
        raise InvalidInput("no advertisers to allocate to")
    if len(thresholds) != instance.n_advertisers:
        raise InvalidInput("one threshold per advertiser required")
    if any(math.isnan(t) or t < 0 for t in thresholds):
        raise InvalidInput(f"thresholds must be nonnegative: {list(thresholds)}")
    vals = valuations(instance, exposure)
    act = range(instance.n_advertisers) if active is None else sorted(active)
    res = _round_robin(vals, thresholds, params.c, params.epsilon, params.seed, iteration, act)
    return Allocation.from_indices(instance, res.bundles, res.phases, "round_robin")


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    decayed: tuple[int, ...]
    delta: tuple[float, ...]
    achieved: tuple[float, ...]
    unsatisfied: tuple[int, ...]


@dataclass
class MmsRunTrace:
    steps: list[TraceStep]
    allocation: Allocation
    status: str
    c: float
    full_values: tuple[float, ...]
    zero_share: tuple[int, ...] = ()
    in_theory: bool = True

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def final_delta(self) -> tuple[float, ...]:
        return self.steps[-1].delta if self.steps else self.full_values

    @property
    def final_achieved(self) -> tuple[float, ...]:
        return self.steps[-1].achieved if self.steps else ()

    def iterations_involving(self, i: int) -> int:
        """Number of outer iterations that decayed advertiser ``i``'s threshold."""
        return sum(i in st.decayed for st in self.steps)

    def rows(self, instance: Instance) -> list[list]:
        out = []
        for st in self.steps:
            y = set(st.unsatisfied)
            for i, a in enumerate(instance.advertisers):
                out.append([st.iteration, a.id, repr(st.delta[i]), repr(st.achieved[i]),
                            int(i in y)])
        return out


TRACE_HEADER = ["iteration", "advertiser_id", "delta", "achieved_influence", "in_Y"]


def approx_mms(instance: Instance, exposure: ExposureMatrix,
               params: AllocParams) -> tuple[Allocation, MmsRunTrace]:
    """Geometric threshold decay around :func:`round_robin`.

    Thresholds start at each advertiser's value for the whole slot set and
    shrink by ``1 / (1 + lam)`` for every advertiser whose bundle misses
    ``c * delta``; stops when nobody misses. Advertisers whose maximin share
    is zero sit out and only share leftovers. If every missing
    advertiser's threshold has sunk below ``delta_floor_ratio`` times its
    starting value the run stops with status ``floor_guard``.
    """
    if instance.n_advertisers == 0:
        raise InvalidInput("no advertisers to allocate to")
    n = instance.n_advertisers
    vals = valuations(instance, exposure)
    everything = range(exposure.n_slots)
    full = tuple(influence(v, everything) for v in vals)
    # a coverage valuation has a positive maximin share iff at least n slots
    # are individually worth something
    zero = tuple(i for i in range(n) if np.count_nonzero(vals[i].singletons > 0) < n)
    active = [i for i in range(n) if i not in zero]
    c = params.c
    delta = list(full)
    unsat = list(active)
    steps: list[TraceStep] = []
    status = "converged"
    res = None
    it = 0
    while unsat:
        for i in unsat:
            delta[i] /= 1.0 + params.lam
        it += 1
        res = _round_robin(vals, delta, c, params.epsilon, params.seed, it, active)
        decayed = tuple(unsat)
        unsat = [i for i in active if res.achieved[i] < c * delta[i]]
        steps.append(TraceStep(it, decayed, tuple(delta), tuple(res.achieved), tuple(unsat)))
        if unsat and all(delta[i] < params.delta_floor_ratio * full[i] for i in unsat):
            status = "floor_guard"
            break
    if res is None:
        res = _round_robin(vals, delta, c, params.epsilon, params.seed, 0, active)
    alloc = Allocation.from_indices(instance, res.bundles, res.phases, "mms")
    trace = MmsRunTrace(steps, alloc, status, c, full, zero, params.in_theory)
    return alloc, trace


def _finish_baseline(instance, bundles, phases, remaining, name) -> Allocation:
    last = instance.n_advertisers - 1
    for s in np.flatnonzero(remaining):
        bundles[last].append(int(s))
        phases[int(s)] = "leftover"
    return Allocation.from_indices(instance, bundles, phases, name)


def _costs(instance: Instance) -> np.ndarray:
    return np.array([s.cost for s in instance.slots], dtype=float)


def greedy_alloc(instance: Instance, exposure: ExposureMatrix) -> Allocation:
    """Advertisers in order each buy the affordable slot of largest marginal
    gain until their demand is met, their budget runs out, or no remaining
    slot adds anything. Leftovers go to the last advertiser."""
    if instance.n_advertisers == 0:
        raise InvalidInput("no advertisers to allocate to")
    vals = valuations(instance, exposure)
    costs = _costs(instance)
    remaining = np.ones(instance.n_slots, dtype=bool)
    bundles = [[] for _ in instance.advertisers]
    phases: dict[int, str] = {}
    for i, adv in enumerate(instance.advertisers):
        if adv.budget <= 0:
            continue
        st = InfluenceState(vals[i])
        spent = 0.0
        while st.total < adv.demand:
            ok = remaining & (spent + costs <= adv.budget)
            if not ok.any():
                break
            gains = np.where(ok, st.all_gains(), -np.inf)
            g = int(np.argmax(gains))
            if gains[g] <= 0:
                break
            st.add_slot(g)
            spent += costs[g]
            remaining[g] = False
            bundles[i].append(g)
            phases[g] = "baseline"
    return _finish_baseline(instance, bundles, phases, remaining, "greedy")


def _walk(instance, vals, order_for, name) -> Allocation:
    # each advertiser walks a slot order, buying whatever is still free and affordable
    costs = _costs(instance)
    remaining = np.ones(instance.n_slots, dtype=bool)
    bundles = [[] for _ in instance.advertisers]
    phases: dict[int, str] = {}
    for i, adv in enumerate(instance.advertisers):
        if adv.budget <= 0:
            continue
        st = InfluenceState(vals[i])
        spent = 0.0
        for s in order_for(i, remaining):
            if st.total >= adv.demand:
                break
            s = int(s)
            if not remaining[s] or spent + costs[s] > adv.budget:
                continue
            st.add_slot(s)
            spent += costs[s]
            remaining[s] = False
            bundles[i].append(s)
            phases[s] = "baseline"
    return _finish_baseline(instance, bundles, phases, remaining, name)


def random_alloc(instance: Instance, exposure: ExposureMatrix, seed: int) -> Allocation:
    """Like greedy, but each purchase is a uniform draw among the affordable
    remaining slots (a seeded shuffle walked in order)."""
    if instance.n_advertisers == 0:
        raise InvalidInput("no advertisers to allocate to")
    vals = valuations(instance, exposure)

    def order(i, remaining):
        return advertiser_rng(seed, i, 0).permutation(np.flatnonzero(remaining))

    return _walk(instance, vals, order, "random")


def topk_alloc(instance: Instance, exposure: ExposureMatrix) -> Allocation:
    """Slots ranked once by singleton influence (ties by position); each
    advertiser consumes the ranked list in turn."""
    if instance.n_advertisers == 0:
        raise InvalidInput("no advertisers to allocate to")
    vals = valuations(instance, exposure)
    ranked = np.lexsort((np.arange(exposure.n_slots), -exposure.singletons))
    return _walk(instance, vals, lambda i, remaining: ranked, "topk")


ALGORITHMS = ("mms", "greedy", "random", "topk")


@dataclass
class RunResult:
    allocation: Allocation
    trace: MmsRunTrace | None = None
    extra: dict = field(default_factory=dict)


def run_algorithm(name: str, instance: Instance, exposure: ExposureMatrix,
                  params: AllocParams) -> RunResult:
    if name == "mms":
        alloc, trace = approx_mms(instance, exposure, params)
        return RunResult(alloc, trace)
    if name == "greedy":
        return RunResult(greedy_alloc(instance, exposure))
    if name == "random":
        return RunResult(random_alloc(instance, exposure, params.seed))
    if name == "topk":
        return RunResult(topk_alloc(instance, exposure))
    raise ConfigError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
