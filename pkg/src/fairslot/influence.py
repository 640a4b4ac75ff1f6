"""Triggering-model influence of slot sets over check-in trajectories.

A trajectory is one user's check-ins. Slot ``s`` reaches user ``j`` with
probability ``p[s, j]`` when one of the user's check-ins lies within ``theta``
metres of the slot's billboard during the slot window, and

    I(S) = sum_j 1 - prod_{s in S} (1 - p[s, j]).

The matrix is stored CSR-style (slots x trajectories). ``InfluenceState``
keeps the per-trajectory survival products so a marginal gain only touches
the trajectories the candidate slot reaches.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .model import Billboard, Instance

EARTH_RADIUS_M = 6_371_008.8


class InvalidInput(ValueError):
    pass


class InvalidOperation(RuntimeError):
    pass


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in metres; broadcasts over numpy arrays."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def slot_probability(billboard: Billboard, max_panel_size: float) -> float:
    if not max_panel_size > 0 or not billboard.panel_size > 0:
        raise InvalidInput(f"panel sizes must be positive (size={billboard.panel_size}, "
                           f"max={max_panel_size})")
    return billboard.panel_size / max_panel_size


@dataclass(frozen=True, eq=False)
class ExposureMatrix:
    """Sparse slot-by-trajectory influence probabilities (immutable)."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_trajectories: int
    slot_ids: tuple[str, ...] = ()
    user_ids: tuple[str, ...] = ()

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, int, float]], n_slots: int,
                     n_trajectories: int, slot_ids: Sequence[str] = (),
                     user_ids: Sequence[str] = (), check: bool = True) -> "ExposureMatrix":
        """Build from ``(slot, trajectory, probability)`` triples.

        With ``check`` the probability range and uniqueness of pairs are
        enforced; tests of the property checkers turn it off to inject faults.
        """
        rows = [[] for _ in range(n_slots)]
        for s, j, p in entries:
            if check:
                if not 0 < p <= 1:
                    raise InvalidInput(f"probability {p} for ({s}, {j}) outside (0, 1]")
                if not (0 <= s < n_slots and 0 <= j < n_trajectories):
                    raise InvalidInput(f"entry ({s}, {j}) out of bounds")
            rows[s].append((j, p))
        indptr = np.zeros(n_slots + 1, dtype=np.int64)
        indices, data = [], []
        for s, row in enumerate(rows):
            row.sort()
            if check and any(a[0] == b[0] for a, b in zip(row, row[1:])):
                raise InvalidInput(f"slot {s} has a repeated trajectory")
            indices.extend(j for j, _ in row)
            data.extend(p for _, p in row)
            indptr[s + 1] = len(indices)
        if not slot_ids:
            slot_ids = tuple(str(s) for s in range(n_slots))
        return cls(indptr, np.asarray(indices, dtype=np.int64), np.asarray(data, dtype=float),
                   n_trajectories, tuple(slot_ids), tuple(user_ids))

    @property
    def n_slots(self) -> int:
        return len(self.indptr) - 1

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[s], self.indptr[s + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.n_slots, self.n_trajectories))

    @cached_property
    def slot_position(self) -> dict[str, int]:
        return {sid: k for k, sid in enumerate(self.slot_ids)}

    @cached_property
    def singletons(self) -> np.ndarray:
        """I({s}) for every slot."""
        return np.asarray(self.csr.sum(axis=1)).ravel()

    def resolve(self, slots: Iterable[int | str]) -> list[int]:
        out = []
        for s in slots:
            if isinstance(s, str):
                if s not in self.slot_position:
                    raise InvalidInput(f"unknown slot id {s!r}")
                out.append(self.slot_position[s])
            else:
                k = int(s)
                if not 0 <= k < self.n_slots:
                    raise InvalidInput(f"unknown slot index {s}")
                out.append(k)
        return out

    def scaled(self, factor: float) -> "ExposureMatrix":
        """Same exposure pattern with every probability multiplied by ``factor``."""
        if factor == 1.0:
            return self
        if not 0 <= factor <= 1:
            raise InvalidInput(f"scale {factor} outside [0, 1]")
        return ExposureMatrix(self.indptr, self.indices, self.data * factor,
                              self.n_trajectories, self.slot_ids, self.user_ids)


def build_exposure(instance: Instance) -> ExposureMatrix:
    """Evaluate exposure for every (slot, user) pair of ``instance``.

    A user is exposed to a slot when any of their check-ins is within
    ``instance.theta`` metres (great-circle) of the billboard and its
    timestamp falls in the half-open window ``[start, start + duration)``.
    """
    slot_ids = tuple(s.slot_id for s in instance.slots)
    user_ids = tuple(sorted({c.user_id for c in instance.checkins}))
    if not instance.billboards or not instance.checkins:
        return ExposureMatrix.from_entries([], len(slot_ids), len(user_ids), slot_ids, user_ids)
    user_pos = {u: j for j, u in enumerate(user_ids)}
    max_size = max(b.panel_size for b in instance.billboards)

    c_lat = np.array([c.lat for c in instance.checkins])
    c_lon = np.array([c.lon for c in instance.checkins])
    c_t = np.array([c.timestamp for c in instance.checkins])
    c_user = np.array([user_pos[c.user_id] for c in instance.checkins])

    # per billboard: window starts/ends sorted, with slot positions
    windows: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    grouped: dict[str, list[tuple[float, float, int]]] = {}
    for k, s in enumerate(instance.slots):
        grouped.setdefault(s.billboard_id, []).append((s.window_start, s.window_end, k))
    for bid, ws in grouped.items():
        ws.sort()
        windows[bid] = tuple(np.array(col) for col in zip(*ws))

    # candidate pairs from a KD-tree on the unit sphere, then an exact haversine gate
    tree = cKDTree(_unit_xyz(c_lat, c_lon))
    chord = 2 * math.sin(min(instance.theta / (2 * EARTH_RADIUS_M), math.pi / 2))
    b_xyz = _unit_xyz(np.array([b.lat for b in instance.billboards]),
                      np.array([b.lon for b in instance.billboards]))
    near = tree.query_ball_point(b_xyz, r=chord * (1 + 1e-9) + 1e-12)

    entries: dict[tuple[int, int], float] = {}
    for b, cand in zip(instance.billboards, near):
        if not cand or b.id not in windows:
            continue
        cand = np.asarray(cand, dtype=np.int64)
        d = haversine_m(b.lat, b.lon, c_lat[cand], c_lon[cand])
        cand = cand[d <= instance.theta]
        if len(cand) == 0:
            continue
        starts, ends, pos = windows[b.id]
        t = c_t[cand]
        w = np.searchsorted(starts, t, side="right") - 1
        ok = w >= 0
        ok[ok] &= t[ok] < ends[w[ok]]
        p = slot_probability(b, max_size)
        for s, j in zip(pos[w[ok]], c_user[cand[ok]]):
            entries[(int(s), int(j))] = p
    return ExposureMatrix.from_entries(((s, j, p) for (s, j), p in entries.items()),
                                       len(slot_ids), len(user_ids), slot_ids, user_ids)


def _unit_xyz(lat, lon) -> np.ndarray:
    la, lo = np.radians(lat), np.radians(lon)
    return np.column_stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)])


def influence(matrix: ExposureMatrix, slots: Iterable[int | str]) -> float:
    """Expected number of trajectories reached by ``slots``."""
    idx = matrix.resolve(slots)
    if not idx:
        return 0.0
    sub = matrix.csr[np.unique(idx)]
    q = np.ones(matrix.n_trajectories)
    np.multiply.at(q, sub.indices, 1.0 - sub.data)
    return math.fsum(1.0 - q)


class InfluenceState:
    """Incremental influence of a growing slot set.

    ``survival[j]`` is the probability that trajectory ``j`` is reached by no
    member slot. Single writer; reads of a frozen state may be shared.
    """

    def __init__(self, matrix: ExposureMatrix):
        self.matrix = matrix
        self.survival = np.ones(matrix.n_trajectories)
        self.total = 0.0
        self.members: set[int] = set()

    def marginal_gain(self, slot: int) -> float:
        cols, p = self.matrix.row(slot)
        return float(self.survival[cols] @ p)

    def marginal_gains(self, slots: np.ndarray) -> np.ndarray:
        """Gains of many candidates at once (one sparse mat-vec)."""
        return self.matrix.csr[slots] @ self.survival

    def all_gains(self) -> np.ndarray:
        return self.matrix.csr @ self.survival

    def add_slot(self, slot: int) -> "InfluenceState":
        if slot in self.members:
            raise InvalidOperation(f"slot {slot} already in the set")
        cols, p = self.matrix.row(slot)
        before = self.survival[cols]
        self.total += float(before @ p)
        self.survival[cols] = before * (1.0 - p)
        self.members.add(slot)
        return self

    def recomputed_total(self) -> float:
        return float(np.sum(1.0 - self.survival))


def new_state(matrix: ExposureMatrix) -> InfluenceState:
    return InfluenceState(matrix)


def save_exposure(path, matrix: ExposureMatrix) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot_id", "user_index", "probability"])
        for s in range(matrix.n_slots):
            cols, p = matrix.row(s)
            for j, pj in zip(cols, p):
                w.writerow([matrix.slot_ids[s], int(j), repr(float(pj))])


def load_or_build_exposure(instance: Instance, cache_path=None) -> ExposureMatrix:
    """Read the exposure cache if present, else build it (and write the cache)."""
    if cache_path is None:
        return build_exposure(instance)
    path = Path(cache_path)
    if not path.is_file():
        matrix = build_exposure(instance)
        save_exposure(path, matrix)
        return matrix
    slot_ids = tuple(s.slot_id for s in instance.slots)
    user_ids = tuple(sorted({c.user_id for c in instance.checkins}))
    pos = {sid: k for k, sid in enumerate(slot_ids)}
    with path.open(newline="") as fh:
        rows = [(pos[r["slot_id"]], int(r["user_index"]), float(r["probability"]))
                for r in csv.DictReader(fh)]
    return ExposureMatrix.from_entries(rows, len(slot_ids), len(user_ids), slot_ids, user_ids)
