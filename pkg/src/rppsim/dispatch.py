"""Vehicles, the fleet and passenger assignment.

A new customer is offered to every vehicle; each vehicle's best insertion is
rated by the change of the objective it causes and the smallest change wins
(lowest vehicle id on ties). Customers without any feasible insertion leave
unserved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import IntegrationMode, SimConfig
from .demand import CustomerRequest
from .network import Network
from .schedule import (
    Schedule,
    Stop,
    insert_customer,
    is_feasible,
    schedule_distance,
)

LOG = logging.getLogger(__name__)


class ConsistencyError(RuntimeError):
    """Internal invariant broken; the simulation cannot continue."""


@dataclass
class Edge:
    source: str
    target: str
    depart_s: float
    arrive_s: float
    length_m: float


@dataclass
class Vehicle:
    id: int
    node: str
    cap_customers: int = 4
    cap_parcels: int = 8
    stops: tuple[Stop, ...] = ()
    customers: dict = field(default_factory=dict)
    parcels: dict = field(default_factory=dict)
    onboard_customers: dict = field(default_factory=dict)
    onboard_parcels: set = field(default_factory=set)
    odometer_m: float = 0.0
    # motion state
    edge: Edge | None = None
    leg: list = field(default_factory=list)  # remaining (node, edge seconds) of the current leg
    board_end_s: float | None = None
    repo_target: str | None = None
    replan: bool = False
    active: bool = False
    _cache: tuple | None = field(default=None, repr=False)

    @property
    def is_idle(self) -> bool:
        """No plan, no passengers and at rest (parcels may be aboard)."""
        return (not self.stops and not self.onboard_customers and self.board_end_s is None
                and self.edge is None and self.repo_target is None)

    def parcel_load(self) -> int:
        return sum(self.parcels[p].size for p in self.onboard_parcels)

    def plan_origin(self, clock: float) -> tuple[str, float]:
        """Node and time from which a new plan can take effect."""
        if self.board_end_s is not None:
            return self.node, max(self.board_end_s, clock)
        if self.edge is not None:
            return self.edge.target, self.edge.arrive_s
        return self.node, clock

    def schedule(self, clock: float) -> Schedule:
        if self._cache is not None and self._cache[0] == clock:
            return self._cache[1]
        node, t = self.plan_origin(clock)
        s = Schedule(node, t, self.stops, dict(self.customers), dict(self.parcels),
                     dict(self.onboard_customers), frozenset(self.onboard_parcels))
        self._cache = (clock, s, None)
        return s

    def planned_distance(self, clock: float, net: Network, cfg: SimConfig) -> float:
        s = self.schedule(clock)
        if self._cache[2] is None:
            self._cache = (clock, s, schedule_distance(s, net, cfg))
        return self._cache[2]

    def invalidate(self):
        self._cache = None


class Fleet:
    def __init__(self, vehicles):
        self.vehicles: list[Vehicle] = sorted(vehicles, key=lambda v: v.id)
        self.by_id = {v.id: v for v in self.vehicles}
        if len(self.by_id) != len(self.vehicles):
            raise ConsistencyError("duplicate vehicle ids")
        self.updated: set[int] = set()  # vehicles whose plan changed this step

    def __iter__(self):
        return iter(self.vehicles)

    def __len__(self):
        return len(self.vehicles)

    def __getitem__(self, vid: int) -> Vehicle:
        return self.by_id[vid]

    def total_km(self) -> float:
        return sum(v.odometer_m for v in self.vehicles) / 1000.0


def make_fleet(net: Network, cfg: SimConfig, start_nodes=None) -> Fleet:
    """Fleet of ``cfg.fleet_size`` vehicles spread evenly over the node list
    unless start nodes are given."""
    if start_nodes is None:
        nodes = net.nodes
        n = cfg.fleet_size
        start_nodes = [nodes[(i * len(nodes)) // n] for i in range(n)] if n else []
    if len(start_nodes) != cfg.fleet_size:
        raise ValueError(f"{len(start_nodes)} start nodes for a fleet of {cfg.fleet_size}")
    for node in start_nodes:
        if node not in net.zones:
            raise ValueError(f"unknown start node {node!r}")
    return Fleet(Vehicle(i, node, cfg.cap_customers, cfg.cap_parcels) for i, node in enumerate(start_nodes))


@dataclass(frozen=True)
class Assignment:
    vehicle_id: int
    schedule: Schedule
    delta: float  # objective change
    added_m: float  # distance change


def commit(fleet: Fleet, vid: int, s: Schedule, mode: IntegrationMode, net: Network, cfg: SimConfig,
           clock: float):
    """Replace the plan of vehicle ``vid`` by ``s``."""
    v = fleet[vid]
    origin = v.plan_origin(clock)
    if (s.start_node, s.start_time_s) != origin:
        raise ConsistencyError(f"vehicle {vid}: schedule starts at {s.start_node}/{s.start_time_s}, "
                               f"vehicle plans from {origin}")
    if dict(s.onboard_customers) != v.onboard_customers or set(s.onboard_parcels) != v.onboard_parcels:
        raise ConsistencyError(f"vehicle {vid}: schedule disagrees with on-board state")
    check = is_feasible(s, mode, net, cfg)
    if not check:
        raise ConsistencyError(f"vehicle {vid}: infeasible commit ({check.violation}): {s}")
    v.stops = s.stops
    v.customers = dict(s.customers)
    v.parcels = dict(s.parcels)
    v.repo_target = None
    if v.edge is not None:
        v.replan = True
    else:
        v.leg = []
    v.invalidate()
    fleet.updated.add(vid)
    LOG.debug("t=%s vehicle %s new plan %s", clock, vid, s)


def best_customer_insertion(fleet: Fleet, r: CustomerRequest, mode, net: Network, cfg: SimConfig,
                            clock: float, per_vehicle: dict | None = None) -> Assignment | None:
    """Minimum objective-change insertion of ``r`` over all vehicles.

    If ``per_vehicle`` is given it is filled with each vehicle's best
    insertion (or None).
    """
    best = None
    reward = cfg.assignment_reward
    latest_pickup = r.request_time_s + cfg.max_wait_s
    for v in fleet:
        node, t = v.plan_origin(clock)
        # cheap bound: pick-up can never be reached in time
        if t + net.min_travel_time(node, r.origin) > latest_pickup:
            if per_vehicle is not None:
                per_vehicle[v.id] = None
            continue
        old = v.schedule(clock)
        cand = insert_customer(old, r, mode, net, cfg)
        if per_vehicle is not None:
            per_vehicle[v.id] = cand
        if cand is None:
            continue
        added = schedule_distance(cand, net, cfg) - v.planned_distance(clock, net, cfg)
        delta = added - reward
        if best is None or delta < best.delta:
            best = Assignment(v.id, cand, delta, added)
    return best


def assign_customer(fleet: Fleet, r: CustomerRequest, mode, net: Network, cfg: SimConfig,
                    clock: float) -> Assignment | None:
    """Assign ``r`` to the best vehicle and commit; None means rejection."""
    best = best_customer_insertion(fleet, r, mode, net, cfg, clock)
    if best is not None:
        commit(fleet, best.vehicle_id, best.schedule, mode, net, cfg, clock)
    return best
