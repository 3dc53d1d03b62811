"""Passenger and parcel demand.

Customers are sampled from hourly zone OD matrices with independent Poisson
counts per (hour, origin zone, destination zone). Parcels are sub-sampled from
a raw per-parcel record list and aggregated into requests of at most
``cap_parcels`` parcels sharing the same origin and destination.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import HOURS, Network


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class CustomerRequest:
    id: int
    origin: str
    destination: str
    request_time_s: float

    def __post_init__(self):
        if self.origin == self.destination:
            raise DemandError(f"customer {self.id}: origin equals destination")
        if not 0 <= self.request_time_s < 86400:
            raise DemandError(f"customer {self.id}: request time outside the day")


@dataclass(frozen=True)
class ParcelRequest:
    id: int
    origin: str
    destination: str
    size: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise DemandError(f"parcel {self.id}: size must be >= 1")
        if self.origin == self.destination:
            raise DemandError(f"parcel {self.id}: origin equals destination")

    def check(self, net: Network, cap_parcels: int):
        if self.size > cap_parcels:
            raise DemandError(f"parcel {self.id}: size {self.size} exceeds vehicle capacity")
        if (self.origin in net.depots) == (self.destination in net.depots):
            raise DemandError(f"parcel {self.id}: exactly one endpoint must be a depot")


@dataclass(frozen=True)
class RawParcel:
    depot: str
    customer_node: str
    direction: str = "delivery"

    def __post_init__(self):
        if self.direction not in ("delivery", "pickup"):
            raise DemandError(f"unknown parcel direction {self.direction!r}")

    @property
    def od(self) -> tuple[str, str]:
        if self.direction == "delivery":
            return self.depot, self.customer_node
        return self.customer_node, self.depot


class OdMatrixSet:
    """Expected trips per hour for each (origin zone, destination zone)."""

    def __init__(self, entries=None):
        self.hours: list[dict[tuple[str, str], float]] = [dict() for _ in range(HOURS)]
        for (h, a, b), trips in (entries or {}).items():
            self.set(h, a, b, trips)

    def set(self, hour: int, origin_zone: str, dest_zone: str, trips: float):
        if not 0 <= hour < HOURS:
            raise DemandError(f"hour {hour} out of range")
        if trips < 0 or math.isnan(trips):
            raise DemandError("OD entries must be >= 0")
        if trips:
            self.hours[hour][(origin_zone, dest_zone)] = float(trips)
        else:
            self.hours[hour].pop((origin_zone, dest_zone), None)

    def items(self, hour: int):
        return sorted(self.hours[hour].items())

    def total(self) -> float:
        return sum(sum(m.values()) for m in self.hours)

    def zones(self) -> set[str]:
        out = set()
        for m in self.hours:
            for a, b in m:
                out.update((a, b))
        return out


def sample_customers(od: OdMatrixSet, net: Network, penetration: float, seed: int) -> list[CustomerRequest]:
    if not 0.0 <= penetration <= 1.0:
        raise DemandError("penetration must lie in [0, 1]")
    members = net.zone_members()
    for z in od.zones():
        if z not in members:
            raise DemandError(f"zone {z} has no nodes")
    rng = np.random.default_rng(seed)
    raw = []
    for h in range(HOURS):
        for (a, b), trips in od.items(h):
            n = int(rng.poisson(trips * penetration))
            if n == 0:
                continue
            za, zb = members[a], members[b]
            if a == b and len(za) < 2:
                continue
            for _ in range(n):
                t = h * 3600 + int(rng.integers(0, 3600))
                o = za[int(rng.integers(len(za)))]
                d = zb[int(rng.integers(len(zb)))]
                while d == o:
                    d = zb[int(rng.integers(len(zb)))]
                raw.append((t, len(raw), o, d))
    raw.sort()
    return [CustomerRequest(i, o, d, float(t)) for i, (t, _, o, d) in enumerate(raw)]


def build_parcels(raw, share: float, cap_parcels: int, seed: int) -> list[ParcelRequest]:
    if not 0.0 <= share <= 1.0:
        raise DemandError("share must lie in [0, 1]")
    if cap_parcels < 1:
        raise DemandError("cap_parcels must be >= 1")
    raw = [r if isinstance(r, RawParcel) else RawParcel(*r) for r in raw]
    k = math.floor(share * len(raw))
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(raw), size=k, replace=False).tolist()) if k else []
    groups: dict[tuple[str, str], int] = defaultdict(int)
    for i in picked:
        groups[raw[i].od] += 1
    out = []
    for (o, d), n in sorted(groups.items()):
        while n > 0:
            size = min(n, cap_parcels)
            out.append(ParcelRequest(len(out), o, d, size))
            n -= size
    return out


# -- file io ------------------------------------------------------------------

def _rows(path, header: list[str]):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = [h.strip() for h in next(reader, [])]
        if got != header:
            raise DemandError(f"{path}: expected header {header}, got {got}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DemandError(f"{path}:{lineno}: expected {len(header)} columns")
            yield lineno, [c.strip() for c in row]


def read_od(path) -> OdMatrixSet:
    od = OdMatrixSet()
    for lineno, (h, a, b, trips) in _rows(path, ["hour", "origin_zone", "destination_zone", "trips"]):
        try:
            od.set(int(h), a, b, float(trips))
        except ValueError as exc:
            raise DemandError(f"{path}:{lineno}: {exc}") from None
    return od


def write_od(od: OdMatrixSet, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("hour,origin_zone,destination_zone,trips\n")
        for h in range(HOURS):
            for (a, b), trips in od.items(h):
                fh.write(f"{h},{a},{b},{trips!r}\n")


def read_raw_parcels(path) -> list[RawParcel]:
    return [RawParcel(*row) for _, row in _rows(path, ["depot_node", "customer_node", "direction"])]


def write_raw_parcels(raw, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("depot_node,customer_node,direction\n")
        for r in raw:
            fh.write(f"{r.depot},{r.customer_node},{r.direction}\n")


def write_customers(customers, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("id,origin,destination,request_time_s\n")
        for c in customers:
            fh.write(f"{c.id},{c.origin},{c.destination},{c.request_time_s!r}\n")


def read_customers(path) -> list[CustomerRequest]:
    return [CustomerRequest(int(i), o, d, float(t))
            for _, (i, o, d, t) in _rows(path, ["id", "origin", "destination", "request_time_s"])]


def write_parcels(parcels, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("id,origin,destination,size\n")
        for p in parcels:
            fh.write(f"{p.id},{p.origin},{p.destination},{p.size}\n")


def read_parcels(path) -> list[ParcelRequest]:
    return [ParcelRequest(int(i), o, d, int(s))
            for _, (i, o, d, s) in _rows(path, ["id", "origin", "destination", "size"])]
