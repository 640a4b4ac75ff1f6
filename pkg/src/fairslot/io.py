"""CSV/JSON readers and writers for instances, allocations and reports.

Numbers are written with ``repr`` so floats survive a round trip exactly.
Loaders for input data skip malformed rows and report them instead of failing;
a missing file or a wrong header is a hard error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .model import Advertiser, Allocation, Billboard, BillboardSlot, Checkin, Instance

CHECKIN_HEADER = ["user_id", "lat", "lon", "timestamp"]
BILLBOARD_HEADER = ["billboard_id", "lat", "lon", "panel_size", "base_cost"]
ADVERTISER_HEADER = ["advertiser_id", "demand", "budget"]
SLOT_HEADER = ["slot_id", "billboard_id", "window_start", "duration", "influence", "cost"]
ALLOCATION_HEADER = ["slot_id", "advertiser_id", "phase"]


class FormatError(ValueError):
    """Unreadable file: missing, or header does not match the expected format."""


@dataclass(frozen=True)
class RowError:
    line: int
    reason: str


def _num(x: float) -> str:
    return repr(float(x))


def _read_rows(path, header: list[str], parse: Callable[[dict], object],
               optional: Iterable[str] = ()) -> tuple[list, list[RowError]]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"{path}: no such file")
    records, errors = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        allowed = set(header) | set(optional)
        if cols[: len(header)] != header or not set(cols) <= allowed:
            raise FormatError(f"{path}: header {cols} does not match {header}")
        for row in reader:
            try:
                records.append(parse(row))
            except (ValueError, TypeError, KeyError) as exc:
                errors.append(RowError(reader.line_num, str(exc)))
    return records, errors


def _write_rows(path, header: list[str], rows: Iterable[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _coord(row: dict) -> tuple[float, float]:
    lat, lon = float(row["lat"]), float(row["lon"])
    if not -90 <= lat <= 90:
        raise ValueError(f"latitude {lat} out of range")
    if not -180 <= lon <= 180:
        raise ValueError(f"longitude {lon} out of range")
    return lat, lon


def _parse_checkin(row: dict) -> Checkin:
    if not row["user_id"]:
        raise ValueError("empty user_id")
    lat, lon = _coord(row)
    return Checkin(row["user_id"], lat, lon, float(row["timestamp"]))


def _parse_billboard(row: dict) -> Billboard:
    if not row["billboard_id"]:
        raise ValueError("empty billboard_id")
    lat, lon = _coord(row)
    size = float(row["panel_size"])
    if not size > 0:
        raise ValueError(f"panel_size {size} must be positive")
    cost = float(row["base_cost"])
    if cost < 0:
        raise ValueError(f"base_cost {cost} negative")
    return Billboard(row["billboard_id"], lat, lon, size, cost)


def _parse_advertiser(row: dict) -> Advertiser:
    demand, budget = float(row["demand"]), float(row["budget"])
    if demand < 0 or budget < 0:
        raise ValueError("demand and budget must be nonnegative")
    uv = row.get("unit_value")
    scale = row.get("influence_scale")
    return Advertiser(
        row["advertiser_id"], demand, budget,
        unit_value=float(uv) if uv not in (None, "") else None,
        influence_scale=float(scale) if scale not in (None, "") else 1.0,
    )


def _parse_slot(row: dict) -> BillboardSlot:
    return BillboardSlot(row["slot_id"], row["billboard_id"], float(row["window_start"]),
                         float(row["duration"]), float(row["influence"]), float(row["cost"]))


def load_checkins(path) -> tuple[list[Checkin], list[RowError]]:
    return _read_rows(path, CHECKIN_HEADER, _parse_checkin)


def load_billboards(path) -> tuple[list[Billboard], list[RowError]]:
    return _read_rows(path, BILLBOARD_HEADER, _parse_billboard)


def load_advertisers(path) -> tuple[list[Advertiser], list[RowError]]:
    return _read_rows(path, ADVERTISER_HEADER, _parse_advertiser,
                      optional=("unit_value", "influence_scale"))


def write_checkins(path, checkins: Iterable[Checkin]) -> None:
    _write_rows(path, CHECKIN_HEADER,
                ([c.user_id, _num(c.lat), _num(c.lon), _num(c.timestamp)] for c in checkins))


def write_billboards(path, billboards: Iterable[Billboard]) -> None:
    _write_rows(path, BILLBOARD_HEADER,
                ([b.id, _num(b.lat), _num(b.lon), _num(b.panel_size), _num(b.base_cost)]
                 for b in billboards))


def write_advertisers(path, advertisers: Iterable[Advertiser]) -> None:
    advertisers = list(advertisers)
    scaled = any(a.influence_scale != 1.0 for a in advertisers)
    header = ADVERTISER_HEADER + ["unit_value"] + (["influence_scale"] if scaled else [])
    rows = []
    for a in advertisers:
        row = [a.id, _num(a.demand), _num(a.budget), _num(a.unit_value)]
        if scaled:
            row.append(_num(a.influence_scale))
        rows.append(row)
    _write_rows(path, header, rows)


def save_instance(instance: Instance, directory) -> Path:
    """Write an instance as a directory of CSVs plus ``instance.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_billboards(d / "billboards.csv", instance.billboards)
    write_checkins(d / "checkins.csv", instance.checkins)
    write_advertisers(d / "advertisers.csv", instance.advertisers)
    _write_rows(d / "slots.csv", SLOT_HEADER,
                ([s.slot_id, s.billboard_id, _num(s.window_start), _num(s.duration),
                  _num(s.influence_cached), _num(s.cost)] for s in instance.slots))
    meta = {"theta": instance.theta, "gamma": instance.gamma, "horizon": list(instance.horizon)}
    (d / "instance.json").write_text(json.dumps(meta, indent=2) + "\n")
    return d


def load_instance(directory) -> Instance:
    d = Path(directory)
    meta_path = d / "instance.json"
    if not meta_path.is_file():
        raise FormatError(f"{meta_path}: no such file")
    meta = json.loads(meta_path.read_text())
    parts = {}
    for name, loader in (("billboards", load_billboards), ("checkins", load_checkins),
                         ("advertisers", load_advertisers)):
        records, errors = loader(d / f"{name}.csv")
        if errors:
            raise FormatError(f"{d / name}.csv: {len(errors)} bad rows, first: {errors[0]}")
        parts[name] = records
    slots, errors = _read_rows(d / "slots.csv", SLOT_HEADER, _parse_slot)
    if errors:
        raise FormatError(f"{d / 'slots.csv'}: bad row {errors[0]}")
    return Instance(slots=slots, theta=float(meta["theta"]), gamma=float(meta["gamma"]),
                    horizon=tuple(meta["horizon"]), **parts)


def write_allocation(path, instance: Instance, alloc: Allocation) -> None:
    owner = alloc.owner_of()
    rows = []
    for s in instance.slots:
        i = owner.get(s.slot_id)
        if i is None:
            continue
        rows.append([s.slot_id, instance.advertisers[i].id, alloc.phase_tags.get(s.slot_id, "")])
    _write_rows(path, ALLOCATION_HEADER, rows)


def read_allocation(path, instance: Instance, algorithm: str = "") -> Allocation:
    adv_pos = {a.id: i for i, a in enumerate(instance.advertisers)}
    rows, errors = _read_rows(path, ALLOCATION_HEADER,
                              lambda r: (r["slot_id"], adv_pos[r["advertiser_id"]], r["phase"]))
    if errors:
        raise FormatError(f"{path}: bad row {errors[0]}")
    bundles: list[set[str]] = [set() for _ in instance.advertisers]
    tags = {}
    for sid, i, phase in rows:
        bundles[i].add(sid)
        if phase:
            tags[sid] = phase
    return Allocation(tuple(bundles), tags, algorithm)


def write_csv(path, header: list[str], rows: Iterable[list]) -> None:
    """Plain CSV writer used by reports and traces."""
    _write_rows(path, header, rows)
