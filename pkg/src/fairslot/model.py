"""Domain types for billboard slot allocation and their validators.

Slots are addressed two ways: by their string ``slot_id`` (files, reports) and
by their position in ``Instance.slots`` (everything numeric). The position
order is the canonical tie-break order used by all allocators; generators and
loaders emit slots sorted by ``slot_id`` so the two orders agree.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

PHASES = ("singleton", "round_robin", "baseline", "leftover")


@dataclass(frozen=True)
class Billboard:
    id: str
    lat: float
    lon: float
    panel_size: float
    base_cost: float = 0.0


@dataclass(frozen=True)
class Checkin:
    user_id: str
    lat: float
    lon: float
    timestamp: float


@dataclass(frozen=True)
class BillboardSlot:
    slot_id: str
    billboard_id: str
    window_start: float
    duration: float
    influence_cached: float = 0.0
    cost: float = 0.0

    @property
    def window_end(self) -> float:
        return self.window_start + self.duration


@dataclass(frozen=True)
class Advertiser:
    """A campaign quotation: ``demand`` influence wanted for ``budget`` money.

    ``unit_value`` defaults to budget per unit of demanded influence, so an
    advertiser who gets exactly their demand at full price breaks even.
    ``influence_scale`` scales every exposure probability when valuing slots
    for this advertiser; 1.0 means the shared influence function and 0.0 an
    advertiser who values no slot.
    """

    id: str
    demand: float
    budget: float
    unit_value: float | None = None
    influence_scale: float = 1.0

    def __post_init__(self):
        if self.unit_value is None:
            v = self.budget / self.demand if self.demand > 0 else 0.0
            object.__setattr__(self, "unit_value", float(v))


@dataclass(frozen=True)
class Instance:
    billboards: tuple[Billboard, ...]
    slots: tuple[BillboardSlot, ...]
    checkins: tuple[Checkin, ...]
    advertisers: tuple[Advertiser, ...]
    theta: float = 100.0
    gamma: float = 0.5
    horizon: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("billboards", "slots", "checkins", "advertisers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "horizon", tuple(float(t) for t in self.horizon))

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def n_advertisers(self) -> int:
        return len(self.advertisers)

    @cached_property
    def slot_index(self) -> dict[str, int]:
        return {s.slot_id: k for k, s in enumerate(self.slots)}

    @cached_property
    def billboard_by_id(self) -> dict[str, Billboard]:
        return {b.id: b for b in self.billboards}

    def replace(self, **changes) -> "Instance":
        fields = dict(
            billboards=self.billboards, slots=self.slots, checkins=self.checkins,
            advertisers=self.advertisers, theta=self.theta, gamma=self.gamma,
            horizon=self.horizon,
        )
        fields.update(changes)
        return Instance(**fields)


@dataclass(frozen=True)
class Allocation:
    """A partition of slot ids into one bundle per advertiser.

    ``bundles[i]`` belongs to ``instance.advertisers[i]``. ``phase_tags`` maps
    each slot id to the allocator phase that assigned it.
    """

    bundles: tuple[frozenset[str], ...]
    phase_tags: Mapping[str, str] = field(default_factory=dict)
    algorithm: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(frozenset(b) for b in self.bundles))
        object.__setattr__(self, "phase_tags", dict(self.phase_tags))

    def owner_of(self) -> dict[str, int]:
        return {s: i for i, b in enumerate(self.bundles) for s in b}

    def bundle_indices(self, instance: Instance) -> list[list[int]]:
        idx = instance.slot_index
        return [sorted(idx[s] for s in b) for b in self.bundles]

    @classmethod
    def from_indices(cls, instance: Instance, bundles: Sequence[Sequence[int]],
                     phases: Mapping[int, str], algorithm: str = "") -> "Allocation":
        ids = [s.slot_id for s in instance.slots]
        return cls(
            bundles=tuple(frozenset(ids[k] for k in b) for b in bundles),
            phase_tags={ids[k]: ph for k, ph in phases.items()},
            algorithm=algorithm,
        )


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    detail: str = ""

    def __str__(self):
        return f"{self.entity}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def validate_instance(instance: Instance) -> list[Violation]:
    """Check every type invariant; returns an empty list for a valid instance."""
    out: list[Violation] = []
    t1, t2 = instance.horizon

    if not 0.0 <= instance.gamma <= 1.0:
        out.append(Violation("instance", "gamma range", f"gamma={instance.gamma} not in [0, 1]"))
    if not instance.theta > 0:
        out.append(Violation("instance", "theta positive", f"theta={instance.theta}"))
    if t2 < t1:
        out.append(Violation("instance", "horizon order", f"{t1} > {t2}"))

    for bid, count in Counter(b.id for b in instance.billboards).items():
        if count > 1:
            out.append(Violation(f"billboard {bid}", "unique id", f"{count} copies"))
    for b in instance.billboards:
        if not b.panel_size > 0:
            out.append(Violation(f"billboard {b.id}", "panel_size positive", str(b.panel_size)))
        if not -90 <= b.lat <= 90:
            out.append(Violation(f"billboard {b.id}", "latitude range", str(b.lat)))
        if not -180 <= b.lon <= 180:
            out.append(Violation(f"billboard {b.id}", "longitude range", str(b.lon)))
        if b.base_cost < 0:
            out.append(Violation(f"billboard {b.id}", "base_cost nonnegative", str(b.base_cost)))

    for c in instance.checkins:
        if not t1 <= c.timestamp <= t2:
            out.append(Violation(f"checkin {c.user_id}@{c.timestamp}", "timestamp within horizon"))
        if not (-90 <= c.lat <= 90 and -180 <= c.lon <= 180):
            out.append(Violation(f"checkin {c.user_id}@{c.timestamp}", "coordinate range"))

    for sid, count in Counter(s.slot_id for s in instance.slots).items():
        if count > 1:
            out.append(Violation(f"slot {sid}", "unique id", f"{count} copies"))
    by_board: dict[str, list[BillboardSlot]] = defaultdict(list)
    known = instance.billboard_by_id
    for s in instance.slots:
        if s.billboard_id not in known:
            out.append(Violation(f"slot {s.slot_id}", "billboard reference",
                                 f"unknown billboard {s.billboard_id}"))
            continue
        if s.cost < 0:
            out.append(Violation(f"slot {s.slot_id}", "cost nonnegative", str(s.cost)))
        if s.influence_cached < 0:
            out.append(Violation(f"slot {s.slot_id}", "influence nonnegative"))
        if not s.duration > 0:
            out.append(Violation(f"slot {s.slot_id}", "duration positive"))
            continue
        by_board[s.billboard_id].append(s)
    for bid, slots in by_board.items():
        problem = _tiling_problem(sorted(slots, key=lambda s: s.window_start), t1, t2)
        if problem:
            out.append(Violation(f"billboard {bid}", "slot tiling", problem))

    for a in instance.advertisers:
        for name in ("demand", "budget", "unit_value"):
            if getattr(a, name) < 0:
                out.append(Violation(f"advertiser {a.id}", f"{name} nonnegative"))
        if not 0 <= a.influence_scale <= 1:
            out.append(Violation(f"advertiser {a.id}", "influence_scale in [0, 1]"))
    for aid, count in Counter(a.id for a in instance.advertisers).items():
        if count > 1:
            out.append(Violation(f"advertiser {aid}", "unique id", f"{count} copies"))
    return out


def _tiling_problem(slots: list[BillboardSlot], t1: float, t2: float) -> str:
    # windows must start at t1, abut exactly, and leave less than one step uncovered
    if abs(slots[0].window_start - t1) > 1e-9:
        return f"first window starts at {slots[0].window_start}, expected {t1}"
    for prev, nxt in zip(slots, slots[1:]):
        if nxt.window_start < prev.window_end - 1e-9:
            return f"{prev.slot_id} overlaps {nxt.slot_id}"
        if nxt.window_start > prev.window_end + 1e-9:
            return f"gap between {prev.slot_id} and {nxt.slot_id}"
    last = slots[-1]
    if last.window_end > t2 + 1e-9:
        return f"{last.slot_id} extends past horizon end {t2}"
    if t2 - last.window_end >= last.duration - 1e-9:
        return f"horizon not covered after {last.slot_id}"
    return ""


def validate_allocation(instance: Instance, alloc: Allocation) -> list[Violation]:
    """Disjointness and completeness of ``alloc`` over the instance's slots."""
    out: list[Violation] = []
    if len(alloc.bundles) != instance.n_advertisers:
        out.append(Violation("allocation", "bundle count",
                             f"{len(alloc.bundles)} bundles for {instance.n_advertisers} advertisers"))
    known = instance.slot_index
    seen: dict[str, int] = {}
    for i, bundle in enumerate(alloc.bundles):
        for sid in sorted(bundle):
            if sid not in known:
                out.append(Violation(f"bundle {i}", "unknown slot", sid))
            elif sid in seen:
                out.append(Violation(f"slot {sid}", "disjointness",
                                     f"in bundles {seen[sid]} and {i}"))
            else:
                seen[sid] = i
    for s in instance.slots:
        if s.slot_id not in seen:
            out.append(Violation(f"slot {s.slot_id}", "completeness", "in no bundle"))
    return out
