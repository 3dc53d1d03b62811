"""Time-stepped simulation loop.

One step at clock ``t``:

1. reveal customers with request time in ``(t - dt, t]`` and assign them,
2. re-balance idle vehicles when ``t`` is a multiple of the repositioning
   period,
3. run the parcel strategy on the vehicles whose plan changed (V^ca),
4. after the parcel deadline, schedule drop-offs for all pending parcels,
5. move vehicles to ``t + dt``, boarding and alighting on the way.

Vehicles that reach a stop while moving join V^ca of the next step. After
the end time no new requests are taken and the vehicles finish their plans
(bounded by ``cfg.drain_limit_s``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .baseline import route_logistics, write_routes
from .config import IntegrationMode, SimConfig, StrategyKind
from .demand import CustomerRequest, OdMatrixSet
from .dispatch import ConsistencyError, Edge, Fleet, assign_customer, make_fleet
from .network import Network, fastest_path
from .rebalance import Rebalancer, rebalance, write_moves
from .strategies import (
    StrategyState,
    cdpa_step,
    force_remaining_deliveries,
    scpa_customer_step,
    sdpa_dropoff_step,
    sdpa_pickup_step,
    write_audit,
)

LOG = logging.getLogger(__name__)

EVENT_HEADER = "t,event_kind,request_id,vehicle_id,node"
TRACE_HEADER = "t,vehicle_id,from_node,to_node,length_m"
SCHEDULE_HEADER = ("vehicle_id,seq,node,arrival_s,departure_s,board_cust,alight_cust,"
                   "board_parcels,alight_parcels")


def fmt_num(x) -> str:
    """Shortest exact text for a number (integers without a trailing .0)."""
    if x is None or x == "":
        return ""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


@dataclass
class SimResult:
    cfg: SimConfig
    events: list
    audit: list
    trace: list
    moves: list
    fleet_km: float
    odometer_m: dict
    customers: list
    parcels: list
    logistics_routes: list = field(default_factory=list)
    logistics_km: float = 0.0
    end_clock: float = 0.0
    report: object = None


class Simulation:
    def __init__(self, net: Network, cfg: SimConfig, customers=(), parcels=(), od: OdMatrixSet | None = None,
                 start_nodes=None):
        self.net = net
        self.cfg = cfg
        self.mode = cfg.mode
        self.customers = sorted(customers, key=lambda r: (r.request_time_s, r.id))
        self.parcels = sorted(parcels, key=lambda p: p.id)
        for p in self.parcels:
            p.check(net, cfg.cap_parcels)
        self.fleet: Fleet = make_fleet(net, cfg, start_nodes)
        self.parcels_on_fleet = self.mode != IntegrationMode.STATUS_QUO
        self.strategy = StrategyState.create(self.parcels if self.parcels_on_fleet else (), cfg)
        self.rebalancer = Rebalancer(net, od, cfg.penetration, cfg.repo_period_s) if (od and cfg.rebalancing) else None
        self.clock = float(cfg.start_time_s)
        self.events: list[tuple] = []
        self.trace: list[tuple] = []
        self.moves: list = []
        self.carried: set[int] = set()
        self._next_customer = 0
        self._first_step = True
        self.status: dict[int, str] = {}
        for p in self.strategy.unassigned.values():
            self.log(self.clock, "parcel_request", p.id, "", p.origin)

    # -- logging --------------------------------------------------------------

    def log(self, t, kind, rid, vid, node):
        self.events.append((t, kind, rid, vid, node))

    # -- step phases ----------------------------------------------------------

    def _reveal(self, clock: float) -> list[CustomerRequest]:
        out = []
        lo = clock - self.cfg.time_step_s
        while self._next_customer < len(self.customers):
            r = self.customers[self._next_customer]
            if r.request_time_s > clock:
                break
            if r.request_time_s <= lo and not self._first_step:
                raise ConsistencyError(f"customer {r.id} revealed late")
            out.append(r)
            self._next_customer += 1
        return out

    def _assign_customers(self, clock: float):
        for r in self._reveal(clock):
            self.log(clock, "request", r.id, "", r.origin)
            if self.cfg.strategy == StrategyKind.SCPA and self.parcels_on_fleet:
                a = scpa_customer_step(self.strategy, self.fleet, r, self.mode, self.net, self.cfg, clock, self.log)
            else:
                a = assign_customer(self.fleet, r, self.mode, self.net, self.cfg, clock)
            if a is None:
                self.status[r.id] = "rejected"
                self.log(clock, "reject", r.id, "", r.origin)
            else:
                self.status[r.id] = "assigned"
                self.log(clock, "assign", r.id, a.vehicle_id, r.origin)

    def _rebalance(self, clock: float):
        if self.rebalancer is None:
            return
        for m in rebalance(self.fleet, self.rebalancer, clock):
            self.moves.append(m)
            self.log(clock, "reposition", "", m.vehicle_id, m.target_node)

    def _vca(self) -> set[int]:
        return set(self.fleet.updated) | self.carried

    def _parcels(self, clock: float):
        if not self.parcels_on_fleet or not self.parcels:
            return
        st, fl, mode, net, cfg = self.strategy, self.fleet, self.mode, self.net, self.cfg
        if cfg.strategy == StrategyKind.CDPA:
            cdpa_step(st, fl, self._vca(), mode, net, cfg, clock, self.log)
            return
        if cfg.strategy == StrategyKind.SDPA or cfg.scpa_background_dropoff:
            sdpa_dropoff_step(st, fl, self._vca(), mode, net, cfg, clock, self.log)
        if clock < cfg.parcel_deadline_s:
            sdpa_pickup_step(st, fl, self._vca(), mode, net, cfg, clock, self.log)
        else:
            force_remaining_deliveries(st, fl, mode, net, cfg, clock, self.log)

    def step(self):
        clock = self.clock
        self._assign_customers(clock)
        if clock % self.cfg.repo_period_s == 0:
            self._rebalance(clock)
        self._parcels(clock)
        self._finish_step(clock)

    def _finish_step(self, clock: float):
        self.fleet.updated.clear()
        self.carried = self.advance(clock, clock + self.cfg.time_step_s)
        self.clock = clock + self.cfg.time_step_s
        self._first_step = False

    # -- motion ---------------------------------------------------------------

    def advance(self, t0: float, t1: float) -> set[int]:
        """Move every vehicle from ``t0`` to ``t1``; returns the ids of
        vehicles that reached a stop."""
        buf = []
        reached = set()
        for v in self.fleet:
            if self._move(v, t0, t1, buf):
                reached.add(v.id)
        buf.sort(key=lambda e: (e[0], e[1]))
        self.events.extend(e[2] for e in buf)
        return reached

    def _move(self, v, t0: float, t1: float, buf) -> bool:
        net = self.net
        now = t0
        reached = False
        seq = 0

        def emit(t, kind, rid, node):
            nonlocal seq
            buf.append(((t, v.id, seq), (v.id, seq), (t, kind, rid, v.id, node)))
            seq += 1

        def busy(t):
            if not v.active:
                v.active = True
                emit(t, "vehicle_busy", "", v.node)

        while True:
            if v.board_end_s is not None:
                if v.board_end_s > t1:
                    break
                now = v.board_end_s
                v.board_end_s = None
                v.invalidate()
                continue
            if v.edge is not None:
                e = v.edge
                if e.arrive_s > t1:
                    break
                now = e.arrive_s
                v.odometer_m += e.length_m
                self.trace.append((e.depart_s, v.id, e.source, e.target, e.length_m))
                v.node = e.target
                v.edge = None
                if v.replan:
                    v.leg = []
                    v.replan = False
                v.invalidate()
                continue
            # at rest at v.node
            if v.stops and v.stops[0].node == v.node:
                self._arrive(v, now, emit)
                reached = True
                busy(now)
                continue
            target = v.stops[0].node if v.stops else v.repo_target
            if target == v.node:
                v.repo_target = None
                v.invalidate()
                target = None
            if target is None:
                v.leg = []
                if v.active:
                    v.active = False
                    emit(now, "vehicle_idle", "", v.node)
                break
            if now >= t1:
                break
            if not v.leg:
                route = fastest_path(net, v.node, target, now)
                hour = int(now // 3600) % 24
                v.leg = [(b, net.edge_time(a, b, hour)) for a, b in zip(route.node_sequence, route.node_sequence[1:])]
            nxt, dt = v.leg.pop(0)
            busy(now)
            v.edge = Edge(v.node, nxt, now, now + dt, net.edge_length(v.node, nxt))
            v.invalidate()
        return reached

    def _arrive(self, v, now: float, emit):
        stop = v.stops[0]
        v.stops = v.stops[1:]
        v.leg = []
        for cid in sorted(stop.alight_customers):
            if cid not in v.onboard_customers:
                raise ConsistencyError(f"vehicle {v.id}: customer {cid} alights but is not aboard")
            del v.onboard_customers[cid]
            del v.customers[cid]
            self.status[cid] = "served"
            emit(now, "dropoff", cid, v.node)
        for pid in sorted(stop.alight_parcels):
            if pid not in v.onboard_parcels:
                raise ConsistencyError(f"vehicle {v.id}: parcel {pid} unloaded but not aboard")
            v.onboard_parcels.discard(pid)
            del v.parcels[pid]
            self.strategy.mark_delivered(pid)
            emit(now, "parcel_dropoff", pid, v.node)
        for cid in sorted(stop.board_customers):
            v.onboard_customers[cid] = now + self.cfg.boarding_time_s
            emit(now, "pickup", cid, v.node)
        for pid in sorted(stop.board_parcels):
            v.onboard_parcels.add(pid)
            emit(now, "parcel_pickup", pid, v.node)
        if len(v.onboard_customers) > v.cap_customers or v.parcel_load() > v.cap_parcels:
            raise ConsistencyError(f"vehicle {v.id}: capacity exceeded at t={now}")
        v.board_end_s = now + self.cfg.boarding_time_s
        v.invalidate()

    # -- run ------------------------------------------------------------------

    def busy_vehicles(self) -> bool:
        return any(v.stops or v.edge is not None or v.board_end_s is not None for v in self.fleet)

    def run(self) -> SimResult:
        cfg = self.cfg
        while self.clock < cfg.end_time_s:
            self.step()
        # no new requests; finish the plans
        for v in self.fleet:
            if v.repo_target is not None:
                v.repo_target = None
                v.leg = []
                v.invalidate()
        limit = cfg.end_time_s + cfg.drain_limit_s
        while self.clock < limit and (self.busy_vehicles() or self._pending_parcels()):
            if self.parcels_on_fleet and cfg.strategy != StrategyKind.CDPA:
                force_remaining_deliveries(self.strategy, self.fleet, self.mode, self.net, cfg, self.clock,
                                           self.log)
            self._finish_step(self.clock)
        # whoever is still active stops now
        for v in self.fleet:
            if v.active and v.edge is None and v.board_end_s is None:
                v.active = False
        if self.busy_vehicles():
            LOG.warning("drain limit reached with unfinished plans")
        logistics, km = [], 0.0
        if not self.parcels_on_fleet and self.parcels:
            logistics, km = route_logistics(self.parcels, self.net, cfg.truck_capacity)
        return SimResult(cfg, self.events, self.strategy.audit, self.trace, self.moves,
                         self.fleet.total_km(), {v.id: v.odometer_m for v in self.fleet},
                         self.customers, self.parcels, logistics, km, self.clock)

    def _pending_parcels(self) -> bool:
        return any(self.strategy.pending_dropoff.values())


def run(cfg: SimConfig, net: Network, customers=(), parcels=(), od: OdMatrixSet | None = None,
        start_nodes=None) -> SimResult:
    """Simulate one day and attach the KPI report."""
    from .kpi import compute

    sim = Simulation(net, cfg, customers, parcels, od, start_nodes)
    res = sim.run()
    res.report = compute(res.events, cfg, parcel_sizes={p.id: p.size for p in res.parcels},
                         fleet_km=res.fleet_km, logistics_km=res.logistics_km,
                         logistics_parcels=[p.id for r in res.logistics_routes for _, p in r.stops])
    return res


# -- output -------------------------------------------------------------------

def write_events(events, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(EVENT_HEADER + "\n")
        for t, kind, rid, vid, node in events:
            fh.write(f"{fmt_num(t)},{kind},{rid},{vid},{node}\n")


def read_events(path) -> list[tuple]:
    import csv

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_HEADER.split(","):
            raise ValueError(f"{path}: not an event log")
        for row in reader:
            if len(row) != 5:
                raise ValueError(f"{path}: malformed row {row}")
            t, kind, rid, vid, node = row
            out.append((float(t), kind, int(rid) if rid else "", int(vid) if vid else "", node))
    return out


def write_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, vid, a, b, length in trace:
            fh.write(f"{fmt_num(t)},{vid},{a},{b},{fmt_num(length)}\n")


def write_schedules(fleet, clock, net, cfg, path):
    """Dump every vehicle's current plan, one line per stop."""
    from .schedule import timed

    def ids(xs):
        return ";".join(str(x) for x in sorted(xs))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEDULE_HEADER + "\n")
        for v in fleet:
            s = v.schedule(clock)
            s = timed(s, s.stops, cfg.mode, net, cfg)
            for k, st in enumerate(s.stops):
                fh.write(f"{v.id},{k},{st.node},{fmt_num(st.planned_arrival_s)},{fmt_num(st.planned_departure_s)},"
                         f"{ids(st.board_customers)},{ids(st.alight_customers)},"
                         f"{ids(st.board_parcels)},{ids(st.alight_parcels)}\n")


def write_outputs(res: SimResult, out_dir) -> dict[str, Path]:
    from .kpi import write_report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.csv",
        "audit": out / "audit.csv",
        "trace": out / "trace.csv",
        "rebalance": out / "rebalance.csv",
    }
    write_events(res.events, paths["events"])
    write_audit(res.audit, paths["audit"])
    write_trace(res.trace, paths["trace"])
    write_moves(res.moves, paths["rebalance"])
    if res.logistics_routes:
        paths["routes"] = out / "routes.csv"
        write_routes(res.logistics_routes, paths["routes"])
    if res.report is not None:
        paths.update(write_report(res.report, out))
    return paths
