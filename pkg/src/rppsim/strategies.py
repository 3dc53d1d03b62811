"""Parcel assignment strategies.

CDPA
    pick-up and drop-off are inserted together; a vehicle qualifies when the
    added distance is below ``(1 - tau) * d_direct``.
SDPA
    pick-up and drop-off are decided separately, each gated by half of that
    budget. Drop-offs are tried before pick-ups in every step.
SCPA
    pick-ups as in SDPA; drop-offs are coupled to new customers and benchmarked
    against the best customer-only insertion.

Every threshold decision is written to the audit log so that the budget
inequalities can be checked after a run. Only vehicles whose plan changed in
the current step (V^ca) are offered parcels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import SimConfig, StrategyKind
from .demand import CustomerRequest, ParcelRequest
from .dispatch import Assignment, ConsistencyError, Fleet, best_customer_insertion, commit
from .network import Network
from .schedule import (
    insert_parcel,
    insert_parcel_destination,
    insert_parcel_origin,
    schedule_distance,
)

LOG = logging.getLogger(__name__)

AUDIT_HEADER = "t,strategy,parcel_id,vehicle_id,d_new_m,d_old_m,d_direct_m,budget_m,accepted,committed"

FORCE = "FORCE"


@dataclass
class AuditRow:
    t: float
    strategy: str
    parcel_id: int
    vehicle_id: int
    d_new_m: float
    d_old_m: float
    d_direct_m: float
    budget_m: float | None
    accepted: bool
    committed: bool = False

    @property
    def added_m(self) -> float:
        return self.d_new_m - self.d_old_m


@dataclass
class StrategyState:
    kind: StrategyKind
    threshold: float
    unassigned: dict = field(default_factory=dict)  # P_u, id -> ParcelRequest
    pending_dropoff: dict = field(default_factory=dict)  # P_v^a, vehicle id -> {id: ParcelRequest}
    scheduled: dict = field(default_factory=dict)  # id -> vehicle id, both stops planned
    delivered: set = field(default_factory=set)
    audit: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = StrategyKind(self.kind)
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")

    @classmethod
    def create(cls, parcels, cfg: SimConfig) -> "StrategyState":
        return cls(cfg.strategy, cfg.threshold, {p.id: p for p in sorted(parcels, key=lambda p: p.id)})

    def budget(self, d_direct: float, half: bool) -> float:
        b = (1.0 - self.threshold) * d_direct
        return b / 2.0 if half else b

    def location(self, pid: int):
        """Where parcel ``pid`` sits in the state machine (for audits)."""
        where = []
        if pid in self.unassigned:
            where.append("unassigned")
        where += [f"pending:{vid}" for vid, ps in self.pending_dropoff.items() if pid in ps]
        if pid in self.scheduled:
            where.append("scheduled")
        if pid in self.delivered:
            where.append("delivered")
        return where

    def mark_delivered(self, pid: int):
        self.scheduled.pop(pid, None)
        self.delivered.add(pid)


def _emit(log, t, kind, rid, vid, node):
    if log is not None:
        log(t, kind, rid, vid, node)


def _direct(net: Network, p: ParcelRequest, clock: float) -> float:
    return net.travel(p.origin, p.destination, clock)[1]


def cdpa_step(state: StrategyState, fleet: Fleet, vca, mode, net: Network, cfg: SimConfig, clock: float,
              log=None) -> list[Assignment]:
    """Offer every unassigned parcel (id order) to the vehicles in ``vca``."""
    out = []
    vids = sorted(vca)
    if not vids:
        return out
    for pid in sorted(state.unassigned):
        p = state.unassigned[pid]
        d_direct = _direct(net, p, clock)
        budget = state.budget(d_direct, half=False)
        best = None
        for vid in vids:
            v = fleet[vid]
            old = v.schedule(clock)
            cand = insert_parcel(old, p, mode, net, cfg, max_added=budget)
            if cand is None:
                continue
            d_old = v.planned_distance(clock, net, cfg)
            d_new = schedule_distance(cand, net, cfg)
            row = AuditRow(clock, "CDPA", pid, vid, d_new, d_old, d_direct, budget, d_new - d_old < budget)
            state.audit.append(row)
            if row.accepted and (best is None or row.added_m < best[0].added_m):
                best = (row, cand)
        if best is None:
            continue
        row, cand = best
        commit(fleet, row.vehicle_id, cand, mode, net, cfg, clock)
        row.committed = True
        del state.unassigned[pid]
        state.scheduled[pid] = row.vehicle_id
        _emit(log, clock, "parcel_assign", pid, row.vehicle_id, p.origin)
        out.append(Assignment(row.vehicle_id, cand, row.added_m - cfg.assignment_reward, row.added_m))
    return out


def sdpa_pickup_step(state: StrategyState, fleet: Fleet, vca, mode, net: Network, cfg: SimConfig,
                     clock: float, log=None) -> list[Assignment]:
    """Origin-only insertion with half budget; parcels move to P_v^a."""
    out = []
    vids = sorted(vca)
    if not vids:
        return out
    for pid in sorted(state.unassigned):
        p = state.unassigned[pid]
        d_direct = _direct(net, p, clock)
        budget = state.budget(d_direct, half=True)
        best = None
        for vid in vids:
            v = fleet[vid]
            old = v.schedule(clock)
            cand = insert_parcel_origin(old, p, mode, net, cfg, max_added=budget)
            if cand is None:
                continue
            d_old = v.planned_distance(clock, net, cfg)
            d_new = schedule_distance(cand, net, cfg)
            row = AuditRow(clock, f"{state.kind.value}-PU", pid, vid, d_new, d_old, d_direct, budget,
                           d_new - d_old < budget)
            state.audit.append(row)
            if row.accepted and (best is None or row.added_m < best[0].added_m):
                best = (row, cand)
        if best is None:
            continue
        row, cand = best
        commit(fleet, row.vehicle_id, cand, mode, net, cfg, clock)
        row.committed = True
        del state.unassigned[pid]
        state.pending_dropoff.setdefault(row.vehicle_id, {})[pid] = p
        _emit(log, clock, "parcel_assign", pid, row.vehicle_id, p.origin)
        out.append(Assignment(row.vehicle_id, cand, row.added_m - cfg.assignment_reward, row.added_m))
    return out


def sdpa_dropoff_step(state: StrategyState, fleet: Fleet, vca, mode, net: Network, cfg: SimConfig,
                      clock: float, log=None) -> list[Assignment]:
    """At most one drop-off per vehicle in ``vca`` (vehicle id order)."""
    out = []
    for vid in sorted(vca):
        pending = state.pending_dropoff.get(vid)
        if not pending:
            continue
        v = fleet[vid]
        old = v.schedule(clock)
        d_old = v.planned_distance(clock, net, cfg)
        best = None
        for pid in sorted(pending):
            p = pending[pid]
            d_direct = _direct(net, p, clock)
            budget = state.budget(d_direct, half=True)
            cand = insert_parcel_destination(old, p, mode, net, cfg, max_added=budget)
            if cand is None:
                continue
            d_new = schedule_distance(cand, net, cfg)
            row = AuditRow(clock, f"{state.kind.value}-DO", pid, vid, d_new, d_old, d_direct, budget,
                           d_new - d_old < budget)
            state.audit.append(row)
            if row.accepted and (best is None or row.added_m < best[0].added_m):
                best = (row, cand)
        if best is None:
            continue
        row, cand = best
        commit(fleet, vid, cand, mode, net, cfg, clock)
        row.committed = True
        p = pending.pop(row.parcel_id)
        state.scheduled[p.id] = vid
        _emit(log, clock, "parcel_dropoff_assign", p.id, vid, p.destination)
        out.append(Assignment(vid, cand, row.added_m, row.added_m))
    return out


def scpa_customer_step(state: StrategyState, fleet: Fleet, r: CustomerRequest, mode, net: Network,
                       cfg: SimConfig, clock: float, log=None) -> Assignment | None:
    """Assign customer ``r``, possibly together with one pending drop-off.

    The benchmark is the best customer-only insertion over the fleet (vehicle
    v_a). For each vehicle v holding pending parcels, its own best customer
    insertion is extended by each parcel's best drop-off. A combination
    qualifies when the fleet distance it adds, compared with the benchmark,
    stays below half the parcel budget::

        (d(comb_v) - d(old_v)) - (d(best_u) - d(old_va)) < (1 - tau) * d_direct / 2

    (for v == v_a this is d(comb_v) - d(best_u)). The qualifying combination
    with the smallest added distance is committed, otherwise the benchmark.
    Returns None when no vehicle can take the customer.
    """
    per_vehicle: dict = {}
    bench = best_customer_insertion(fleet, r, mode, net, cfg, clock, per_vehicle=per_vehicle)
    if bench is None:
        return None
    best = None
    for vid in sorted(per_vehicle):
        cand_u = per_vehicle[vid]
        pending = state.pending_dropoff.get(vid)
        if cand_u is None or not pending:
            continue
        v = fleet[vid]
        d_old_v = v.planned_distance(clock, net, cfg)
        for pid in sorted(pending):
            p = pending[pid]
            d_direct = _direct(net, p, clock)
            budget = state.budget(d_direct, half=True)
            comb = insert_parcel_destination(cand_u, p, mode, net, cfg)
            if comb is None:
                continue
            d_comb = schedule_distance(comb, net, cfg)
            # reference: benchmark fleet distance expressed on this vehicle's scale
            d_ref = bench.added_m + d_old_v
            row = AuditRow(clock, "SCPA-DO", pid, vid, d_comb, d_ref, d_direct, budget, d_comb - d_ref < budget)
            state.audit.append(row)
            added = d_comb - d_old_v
            if row.accepted and (best is None or added < best[0]):
                best = (added, row, comb)
    if best is None:
        commit(fleet, bench.vehicle_id, bench.schedule, mode, net, cfg, clock)
        return bench
    added, row, comb = best
    commit(fleet, row.vehicle_id, comb, mode, net, cfg, clock)
    row.committed = True
    p = state.pending_dropoff[row.vehicle_id].pop(row.parcel_id)
    state.scheduled[p.id] = row.vehicle_id
    _emit(log, clock, "parcel_dropoff_assign", p.id, row.vehicle_id, p.destination)
    return Assignment(row.vehicle_id, comb, added - cfg.assignment_reward, added)


def force_remaining_deliveries(state: StrategyState, fleet: Fleet, mode, net: Network, cfg: SimConfig,
                               clock: float, log=None) -> list[Assignment]:
    """Schedule a drop-off for every parcel still pending on any vehicle.

    Per vehicle the cheapest drop-off is inserted repeatedly, without a
    budget. Safe to call repeatedly; a no-op once nothing is pending.
    """
    out = []
    for vid in sorted(state.pending_dropoff):
        pending = state.pending_dropoff[vid]
        v = fleet[vid]
        while pending:
            old = v.schedule(clock)
            d_old = v.planned_distance(clock, net, cfg)
            best = None
            for pid in sorted(pending):
                cand = insert_parcel_destination(old, pending[pid], mode, net, cfg)
                if cand is None:
                    continue
                d_new = schedule_distance(cand, net, cfg)
                if best is None or d_new < best[0]:
                    best = (d_new, pid, cand)
            if best is None:
                raise ConsistencyError(f"vehicle {vid}: no feasible drop-off for parcels {sorted(pending)}")
            d_new, pid, cand = best
            p = pending.pop(pid)
            commit(fleet, vid, cand, mode, net, cfg, clock)
            state.audit.append(AuditRow(clock, FORCE, pid, vid, d_new, d_old, _direct(net, p, clock), None,
                                        True, True))
            state.scheduled[pid] = vid
            _emit(log, clock, "parcel_dropoff_assign", pid, vid, p.destination)
            out.append(Assignment(vid, cand, d_new - d_old, d_new - d_old))
    return out


def write_audit(rows, path):
    def num(x):
        return "" if x is None else repr(float(x))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(AUDIT_HEADER + "\n")
        for r in rows:
            fh.write(f"{num(r.t)},{r.strategy},{r.parcel_id},{r.vehicle_id},{num(r.d_new_m)},{num(r.d_old_m)},"
                     f"{num(r.d_direct_m)},{num(r.budget_m)},{int(r.accepted)},{int(r.committed)}\n")


def read_audit(path) -> list[AuditRow]:
    import csv

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(AuditRow(float(row["t"]), row["strategy"], int(row["parcel_id"]), int(row["vehicle_id"]),
                                float(row["d_new_m"]), float(row["d_old_m"]), float(row["d_direct_m"]),
                                float(row["budget_m"]) if row["budget_m"] else None,
                                row["accepted"] == "1", row["committed"] == "1"))
    return out
