"""Performance indicators computed from the event log.

Waiting time runs from the request to the start of boarding, travel time from
the start of boarding to the arrival at the destination. A vehicle counts as
active while driving or boarding.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .config import SimConfig

HIST_BIN_S = 60
OCCUPANCY_STEP_S = 900

EVENT_KINDS = frozenset({
    "request", "assign", "reject", "pickup", "dropoff",
    "parcel_request", "parcel_assign", "parcel_dropoff_assign", "parcel_pickup", "parcel_dropoff",
    "reposition", "vehicle_busy", "vehicle_idle",
})

SUMMARY_KEYS = (
    "customers_requested", "customers_served", "customers_rejected", "service_rate",
    "parcel_requests", "parcel_items", "parcel_requests_served", "parcel_items_served",
    "parcel_requests_unserved", "parcel_items_unserved", "parcel_requests_picked_up",
    "mean_wait_s", "mean_travel_s",
    "fleet_km", "logistics_km", "total_km", "utilization", "km_per_served",
)


class KpiError(ValueError):
    pass


@dataclass
class KpiReport:
    summary: dict = field(default_factory=dict)
    wait_hist: list = field(default_factory=list)  # (bin start s, count)
    travel_hist: list = field(default_factory=list)
    pudo_hist: list = field(default_factory=list)  # (hour, cust PU, cust DO, parcel PU, parcel DO)
    occupancy_ts: list = field(default_factory=list)  # (t, count with 0 parcels, 1 parcel, ...)

    def __getitem__(self, key):
        return self.summary[key]


def _hist(values, width: int) -> list[tuple[int, int]]:
    if not values:
        return []
    c = Counter(int(v // width) for v in values)
    return [(k * width, c.get(k, 0)) for k in range(0, max(c) + 1)]


def _mean(values):
    return sum(values) / len(values) if values else 0.0


def compute(event_log, cfg: SimConfig, parcel_sizes: dict | None = None, fleet_km: float = 0.0,
            logistics_km: float = 0.0, logistics_parcels=()) -> KpiReport:
    """Aggregate an event log (tuples ``(t, kind, request_id, vehicle_id,
    node)``) into a report. ``fleet_km`` comes from the vehicle odometers;
    ``logistics_parcels`` are parcel ids delivered by the truck fleet."""
    parcel_sizes = parcel_sizes or {}
    requested, assigned, rejected = {}, set(), set()
    pickup_t, dropoff_t = {}, {}
    parcels, p_picked, p_delivered = set(), set(), set()
    pudo = [[0, 0, 0, 0] for _ in range(24)]
    active_since: dict = {}
    active_time = 0.0
    start, end = cfg.start_time_s, cfg.end_time_s
    # per vehicle: active flag and parcels aboard, sampled for the occupancy series
    moving: dict = {}
    aboard: dict = Counter()
    samples = []
    next_sample = start
    cap = cfg.cap_parcels

    def sample_until(t):
        nonlocal next_sample
        while next_sample <= end and next_sample < t:
            row = [0] * (cap + 1)
            for vid, on in moving.items():
                if on:
                    row[min(aboard[vid], cap)] += 1
            samples.append((next_sample, *row))
            next_sample += OCCUPANCY_STEP_S

    last_t = None
    for ev in event_log:
        if len(ev) != 5:
            raise KpiError(f"malformed event {ev!r}")
        t, kind, rid, vid, _ = ev
        if kind not in EVENT_KINDS:
            raise KpiError(f"unknown event kind {kind!r}")
        t = float(t)
        if last_t is not None and t < last_t:
            raise KpiError(f"event log not in time order at {ev!r}")
        last_t = t
        sample_until(t)
        if kind == "request":
            if rid in requested:
                raise KpiError(f"customer {rid} requested twice")
            requested[rid] = t
        elif kind == "assign":
            if rid not in requested:
                raise KpiError(f"customer {rid} assigned before request")
            assigned.add(rid)
        elif kind == "reject":
            if rid not in requested:
                raise KpiError(f"customer {rid} rejected before request")
            rejected.add(rid)
        elif kind == "pickup":
            if rid not in assigned:
                raise KpiError(f"customer {rid} picked up but never assigned")
            pickup_t[rid] = t
            pudo[int(t // 3600) % 24][0] += 1
        elif kind == "dropoff":
            if rid not in pickup_t:
                raise KpiError(f"customer {rid} dropped off before pick-up")
            dropoff_t[rid] = t
            pudo[int(t // 3600) % 24][1] += 1
        elif kind == "parcel_request":
            parcels.add(rid)
        elif kind == "parcel_pickup":
            p_picked.add(rid)
            aboard[vid] += 1
            pudo[int(t // 3600) % 24][2] += 1
        elif kind == "parcel_dropoff":
            if rid not in p_picked:
                raise KpiError(f"parcel {rid} delivered before pick-up")
            p_delivered.add(rid)
            aboard[vid] -= 1
            pudo[int(t // 3600) % 24][3] += 1
        elif kind == "vehicle_busy":
            moving[vid] = True
            active_since[vid] = t
        elif kind == "vehicle_idle":
            moving[vid] = False
            if vid in active_since:
                t0 = active_since.pop(vid)
                active_time += max(0.0, min(t, end) - max(t0, start))
    sample_until(float("inf"))
    trucks = set(logistics_parcels)
    if trucks & parcels:
        raise KpiError("parcels served by both fleets")
    parcels |= trucks
    for vid, t0 in active_since.items():
        active_time += max(0.0, end - max(t0, start))

    waits = [pickup_t[c] - requested[c] for c in sorted(pickup_t)]
    travels = [dropoff_t[c] - pickup_t[c] for c in sorted(dropoff_t)]
    n_req = len(requested)
    served = len(assigned)
    size = {p: parcel_sizes.get(p, 1) for p in parcels}
    items = sum(size.values())
    served_parcels = p_delivered | trucks
    items_served = sum(size[p] for p in served_parcels)
    total_km = fleet_km + logistics_km
    denom = served + len(served_parcels)
    duration = end - start
    summary = {
        "customers_requested": n_req,
        "customers_served": served,
        "customers_rejected": len(rejected),
        "service_rate": served / n_req if n_req else 0.0,
        "parcel_requests": len(parcels),
        "parcel_items": items,
        "parcel_requests_served": len(served_parcels),
        "parcel_items_served": items_served,
        "parcel_requests_unserved": len(parcels) - len(served_parcels),
        "parcel_items_unserved": items - items_served,
        "parcel_requests_picked_up": len(p_picked),
        "mean_wait_s": _mean(waits),
        "mean_travel_s": _mean(travels),
        "fleet_km": fleet_km,
        "logistics_km": logistics_km,
        "total_km": total_km,
        "utilization": active_time / (cfg.fleet_size * duration) if cfg.fleet_size and duration > 0 else 0.0,
        "km_per_served": total_km / denom if denom else None,
    }
    return KpiReport(
        summary=summary,
        wait_hist=_hist(waits, HIST_BIN_S),
        travel_hist=_hist(travels, HIST_BIN_S),
        pudo_hist=[(h, *pudo[h]) for h in range(24)],
        occupancy_ts=samples,
    )


# -- io -----------------------------------------------------------------------

FILES = {
    "wait_hist": "bin_start_s,count",
    "travel_hist": "bin_start_s,count",
    "pudo_hist": "hour,customer_pickups,customer_dropoffs,parcel_pickups,parcel_dropoffs",
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _parse(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return float(s)


def write_report(report: KpiReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    p = out / "summary.csv"
    with p.open("w", newline="", encoding="utf-8") as fh:
        fh.write("key,value\n")
        for k, v in report.summary.items():
            fh.write(f"{k},{_fmt(v)}\n")
    paths["summary"] = p
    for name, header in FILES.items():
        p = out / f"{name}.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in getattr(report, name):
                fh.write(",".join(_fmt(x) for x in row) + "\n")
        paths[name] = p
    p = out / "occupancy_ts.csv"
    width = max((len(r) - 1 for r in report.occupancy_ts), default=0)
    with p.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + [f"parcels_{k}" for k in range(width)]) + "\n")
        for row in report.occupancy_ts:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    paths["occupancy_ts"] = p
    return paths


def read_report(out_dir) -> KpiReport:
    out = Path(out_dir)

    def rows(name):
        with (out / f"{name}.csv").open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            return [tuple(_parse(c) for c in r) for r in reader if r]

    summary = {}
    with (out / "summary.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for k, v in reader:
            summary[k] = _parse(v)
    return KpiReport(summary, rows("wait_hist"), rows("travel_hist"), rows("pudo_hist"), rows("occupancy_ts"))
