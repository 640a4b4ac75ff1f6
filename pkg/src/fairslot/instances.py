"""Problem instances: synthetic generation, the six-slot counter example,
small random instances for the oracle, and slot tiling."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .influence import ExposureMatrix, build_exposure
from .io import load_billboards, load_checkins  # noqa: F401  (re-exported)
from .model import Advertiser, Allocation, Billboard, BillboardSlot, Checkin, Instance

log = logging.getLogger(__name__)

M_PER_DEG_LAT = 111_320.0


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenParams:
    """Synthetic market parameters.

    ``alpha`` is total demand over total singleton influence, ``beta`` the
    mean individual demand over the same. Advertiser count is
    ``round(alpha / beta)`` unless ``n_advertisers`` is set, in which case
    beta becomes ``alpha / n_advertisers``.
    """

    alpha: float = 1.0
    beta: float = 0.05
    omega_range: tuple[float, float] = (0.8, 1.2)
    tau_range: tuple[float, float] = (0.9, 1.1)
    psi_range: tuple[float, float] = (0.9, 1.1)
    theta: float = 100.0
    delta_slot: float = 3600.0
    gamma: float = 0.5
    seed: int = 0
    n_advertisers: int | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise GenerationError("alpha and beta must be positive")
        if self.n_advertisers is not None and self.n_advertisers < 1:
            raise GenerationError("n_advertisers must be >= 1")

    @property
    def k(self) -> int:
        if self.n_advertisers is not None:
            return self.n_advertisers
        return max(1, round(self.alpha / self.beta))

    @property
    def effective_beta(self) -> float:
        return self.alpha / self.n_advertisers if self.n_advertisers else self.beta


@dataclass(frozen=True)
class BaseData:
    billboards: tuple[Billboard, ...]
    checkins: tuple[Checkin, ...]
    horizon: tuple[float, float] | None = None

    def resolved_horizon(self, delta: float) -> tuple[float, float]:
        if self.horizon is not None:
            return self.horizon
        ts = [c.timestamp for c in self.checkins]
        t1 = min(ts)
        n = math.floor((max(ts) - t1) / delta) + 1
        return (t1, t1 + n * delta)


def slotify(billboards, horizon: tuple[float, float], delta_slot: float) -> list[BillboardSlot]:
    """One slot per billboard per full window of length ``delta_slot``."""
    if not delta_slot > 0:
        raise GenerationError(f"slot duration must be positive, got {delta_slot}")
    t1, t2 = horizon
    span = (t2 - t1) / delta_slot
    n_windows = math.floor(span + 1e-9)
    if span - n_windows > 1e-9:
        log.warning("horizon %.0fs is not a multiple of %.0fs; dropping the final partial window",
                    t2 - t1, delta_slot)
    width = max(2, len(str(max(n_windows - 1, 0))))
    slots = [BillboardSlot(f"{b.id}#{w:0{width}d}", b.id, t1 + w * delta_slot, delta_slot)
             for b in billboards for w in range(n_windows)]
    return sorted(slots, key=lambda s: s.slot_id)


def generate_with_exposure(base: BaseData, params: GenParams) -> tuple[Instance, ExposureMatrix]:
    if not base.billboards or not base.checkins:
        raise GenerationError("base data needs billboards and check-ins")
    horizon = base.resolved_horizon(params.delta_slot)
    slots = slotify(base.billboards, horizon, params.delta_slot)
    inst = Instance(base.billboards, slots, base.checkins, (), params.theta, params.gamma, horizon)
    exposure = build_exposure(inst)
    singles = exposure.singletons
    supply = float(singles.sum())
    if supply <= 0:
        raise GenerationError("no slot reaches any trajectory; nothing to sell")

    rng = np.random.default_rng([params.seed, 0x9E4])
    k = params.k
    omega = rng.uniform(*params.omega_range, size=k)
    psi = rng.uniform(*params.psi_range, size=k)
    tau = rng.uniform(*params.tau_range, size=len(slots))
    width = len(str(k))
    advertisers = []
    for i in range(k):
        demand = math.floor(omega[i] * supply * params.effective_beta)
        advertisers.append(Advertiser(f"a{i + 1:0{width}d}", float(demand),
                                      float(math.floor(psi[i] * demand))))
    slots = [replace(s, influence_cached=float(singles[n]),
                     cost=float(math.floor(tau[n] * singles[n] / 10)))
             for n, s in enumerate(slots)]
    return inst.replace(slots=slots, advertisers=advertisers), exposure


def generate(base: BaseData, params: GenParams) -> Instance:
    return generate_with_exposure(base, params)[0]


def _offsets_to_latlon(center, dx_m, dy_m):
    lat0, lon0 = center
    lat = lat0 + dy_m / M_PER_DEG_LAT
    lon = lon0 + dx_m / (M_PER_DEG_LAT * math.cos(math.radians(lat0)))
    return lat, lon


def synthetic_base(n_billboards: int = 100, n_windows: int = 20, n_users: int = 3000,
                   checkins_per_user: int = 8, box_m: float = 2000.0,
                   center: tuple[float, float] = (40.75, -73.98), delta_slot: float = 3600.0,
                   panel_range: tuple[float, float] = (1.0, 4.0), seed: int = 0) -> BaseData:
    """Billboards and check-ins scattered uniformly over a square box,
    check-in times uniform over ``n_windows`` slot lengths."""
    rng = np.random.default_rng([seed, 0xBA5E])
    horizon = (0.0, n_windows * delta_slot)
    bx, by = rng.uniform(0, box_m, (2, n_billboards))
    blat, blon = _offsets_to_latlon(center, bx - box_m / 2, by - box_m / 2)
    sizes = rng.uniform(*panel_range, n_billboards)
    bwidth = len(str(n_billboards))
    billboards = tuple(Billboard(f"b{k:0{bwidth}d}", float(blat[k]), float(blon[k]),
                                 float(sizes[k]), 0.0) for k in range(n_billboards))
    total = n_users * checkins_per_user
    cx, cy = rng.uniform(0, box_m, (2, total))
    clat, clon = _offsets_to_latlon(center, cx - box_m / 2, cy - box_m / 2)
    ts = rng.uniform(*horizon, total)
    uwidth = len(str(n_users))
    checkins = tuple(Checkin(f"u{k // checkins_per_user:0{uwidth}d}", float(clat[k]),
                             float(clon[k]), float(ts[k])) for k in range(total))
    return BaseData(billboards, checkins, horizon)


def small_instance(seed: int, n_slots: int, n_advertisers: int,
                   heterogeneous: bool = False) -> tuple[Instance, ExposureMatrix]:
    """A tiny overlapping market (one window per billboard) for oracle checks."""
    for attempt in range(100):
        rng = np.random.default_rng([seed, attempt, 0x5A11])
        base = synthetic_base(n_billboards=n_slots, n_windows=1,
                              n_users=int(rng.integers(4, 12)),
                              checkins_per_user=int(rng.integers(1, 4)), box_m=300.0,
                              seed=int(rng.integers(1 << 31)))
        params = GenParams(alpha=1.0, theta=100.0, seed=seed, n_advertisers=n_advertisers)
        try:
            inst, exposure = generate_with_exposure(base, params)
        except GenerationError:
            continue
        if heterogeneous:
            scales = rng.uniform(0.3, 1.0, n_advertisers)
            inst = inst.replace(advertisers=[replace(a, influence_scale=float(s))
                                             for a, s in zip(inst.advertisers, scales)])
        return inst, exposure
    raise GenerationError(f"could not build a small instance for seed {seed}")


TOY_INFLUENCE = (2, 6, 3, 7, 1, 1)
TOY_COST = (4, 12, 6, 14, 2, 2)
TOY_DEMAND = (5, 7, 8, 3)
TOY_BUDGET = (15, 15, 17, 6)


def toy_market() -> Instance:
    """Six slots, four advertisers; each slot reaches its own users with certainty.

    Billboards sit about 840 m apart, so with a 100 m radius no user is
    shared and influence is additive.
    """
    billboards, slots, checkins = [], [], []
    for k, (reach, cost) in enumerate(zip(TOY_INFLUENCE, TOY_COST), start=1):
        b = Billboard(f"b{k}", 40.70, -74.00 + 0.01 * k, 1.0, float(cost))
        billboards.append(b)
        slots.append(BillboardSlot(f"bs{k}", b.id, 0.0, 3600.0, float(reach), float(cost)))
        checkins.extend(Checkin(f"u{k}_{r}", b.lat, b.lon, 1800.0) for r in range(reach))
    advertisers = [Advertiser(f"a{i}", float(d), float(u))
                   for i, (d, u) in enumerate(zip(TOY_DEMAND, TOY_BUDGET), start=1)]
    return Instance(billboards, slots, checkins, advertisers, theta=100.0, gamma=0.5,
                    horizon=(0.0, 3600.0))


def toy_reference_allocation():
    """The unfair allotment of the counter example (a4 gets nothing)."""
    return Allocation((frozenset({"bs2"}), frozenset({"bs4"}),
                       frozenset({"bs1", "bs3", "bs5", "bs6"}), frozenset()),
                      algorithm="reference")
