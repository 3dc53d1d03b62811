"""Vehicle schedules, feasibility checks, the assignment objective and the
insertion primitives shared by passenger dispatch and the parcel strategies.

A schedule is a plain value: the vehicle's planning origin (node and time it
becomes free there), the remaining stops, the requests it serves and what is
already on board. Stop times are always re-derived by propagating from the
planning origin, one fixed boarding duration per stop.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .config import IntegrationMode, SimConfig
from .demand import CustomerRequest, ParcelRequest
from .network import Network

EMPTY: frozenset = frozenset()
# seconds; absorbs float summation order differences in time checks
TIME_EPS = 1e-6

_DEFAULT_CFG = SimConfig()

PRECEDENCE = "precedence"
CAPACITY_CUSTOMERS = "capacity_customers"
CAPACITY_PARCELS = "capacity_parcels"
MODERATE = "moderate"
WAIT = "wait"
DETOUR = "detour"


@dataclass(frozen=True)
class Stop:
    node: str
    board_customers: frozenset = EMPTY
    alight_customers: frozenset = EMPTY
    board_parcels: frozenset = EMPTY
    alight_parcels: frozenset = EMPTY
    planned_arrival_s: float | None = field(default=None, compare=False)
    planned_departure_s: float | None = field(default=None, compare=False)

    def merged(self, other: "Stop") -> "Stop":
        return Stop(
            self.node,
            self.board_customers | other.board_customers,
            self.alight_customers | other.alight_customers,
            self.board_parcels | other.board_parcels,
            self.alight_parcels | other.alight_parcels,
        )

    @property
    def has_customer_action(self) -> bool:
        return bool(self.board_customers or self.alight_customers)

    @property
    def is_parcel_only(self) -> bool:
        return not self.has_customer_action

    def label(self) -> str:
        parts = []
        for tag, ids in (("+c", self.board_customers), ("-c", self.alight_customers),
                         ("+p", self.board_parcels), ("-p", self.alight_parcels)):
            parts.extend(f"{tag}{i}" for i in sorted(ids))
        return f"{self.node}[{' '.join(parts)}]"


@dataclass(frozen=True)
class Schedule:
    start_node: str
    start_time_s: float
    stops: tuple[Stop, ...] = ()
    customers: Mapping[int, CustomerRequest] = field(default_factory=dict)
    parcels: Mapping[int, ParcelRequest] = field(default_factory=dict)
    # customer id -> time its boarding completed
    onboard_customers: Mapping[int, float] = field(default_factory=dict)
    onboard_parcels: frozenset = EMPTY

    @property
    def n_requests(self) -> int:
        return len(self.customers) + len(self.parcels)

    def parcel_load(self) -> int:
        return sum(self.parcels[p].size for p in self.onboard_parcels)

    def dropoff_scheduled(self, parcel_id: int) -> bool:
        return any(parcel_id in s.alight_parcels for s in self.stops)

    def pickup_scheduled(self, parcel_id: int) -> bool:
        return any(parcel_id in s.board_parcels for s in self.stops)

    def __str__(self):
        return f"@{self.start_node}/{self.start_time_s:g}: " + " -> ".join(s.label() for s in self.stops)


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


def _merge_adjacent(seq) -> list[Stop]:
    out: list[Stop] = []
    for s in seq:
        if out and out[-1].node == s.node:
            out[-1] = out[-1].merged(s)
        else:
            out.append(s)
    return out


def _evaluate(s: Schedule, stops, mode, net: Network, cfg: SimConfig, diagnose=False, times=False):
    """Propagate timings over ``stops`` and check every constraint.

    Returns (violation, distance, arrivals, departures); violation is None for
    a feasible sequence. Without ``diagnose`` the first violation found aborts;
    with it, structural violations (precedence, moderate, capacity) are
    reported ahead of timing ones.
    """
    customers = s.customers
    parcels = s.parcels
    tb = cfg.boarding_time_s
    max_wait = cfg.max_wait_s + TIME_EPS
    travel_factor = cfg.max_travel_factor
    moderate = mode == IntegrationMode.MODERATE
    cap_c = cfg.cap_customers
    cap_p = cfg.cap_parcels
    travel = net.travel

    on_c = dict(s.onboard_customers)
    on_p = set(s.onboard_parcels)
    load_p = sum(parcels[p].size for p in on_p)
    boarded_c: set = set()
    boarded_p: set = set()
    structural = None
    timing = None
    t = s.start_time_s
    node = s.start_node
    dist = 0.0
    arrivals = [] if times else None
    departures = [] if times else None
    for stop in stops:
        if stop.node != node:
            tt, dd = travel(node, stop.node, t)
            t += tt
            dist += dd
            node = stop.node
        arr = t
        if moderate and on_c and not (stop.board_customers or stop.alight_customers):
            structural = structural or MODERATE
        for c in stop.alight_customers:
            picked = on_c.pop(c, None)
            if picked is None:
                structural = structural or PRECEDENCE
            elif timing is None:
                req = customers[c]
                ttd = travel(req.origin, req.destination, req.request_time_s)[0]
                if arr - picked > travel_factor * ttd + TIME_EPS:
                    timing = DETOUR
        for p in stop.alight_parcels:
            if p in on_p:
                on_p.discard(p)
                load_p -= parcels[p].size
            else:
                structural = structural or PRECEDENCE
        for c in stop.board_customers:
            if c in on_c or c in boarded_c or c in s.onboard_customers:
                structural = structural or PRECEDENCE
            else:
                boarded_c.add(c)
                on_c[c] = arr + tb
                if timing is None and arr - customers[c].request_time_s > max_wait:
                    timing = WAIT
        for p in stop.board_parcels:
            if p in on_p or p in boarded_p or p in s.onboard_parcels:
                structural = structural or PRECEDENCE
            else:
                boarded_p.add(p)
                on_p.add(p)
                load_p += parcels[p].size
        if len(on_c) > cap_c:
            structural = structural or CAPACITY_CUSTOMERS
        if load_p > cap_p:
            structural = structural or CAPACITY_PARCELS
        if not diagnose and (structural or timing):
            return structural or timing, dist, arrivals, departures
        t = arr + tb
        if times:
            arrivals.append(arr)
            departures.append(t)
    if structural is None:
        # every customer must be picked up (unless aboard) and dropped off
        if on_c or any(c not in boarded_c and c not in s.onboard_customers for c in customers):
            structural = PRECEDENCE
        elif any(p not in boarded_p and p not in s.onboard_parcels for p in parcels):
            structural = PRECEDENCE
    return structural or timing, dist, arrivals, departures


def is_feasible(s: Schedule, mode: IntegrationMode, net: Network, cfg: SimConfig) -> Feasibility:
    violation = _evaluate(s, s.stops, mode, net, cfg, diagnose=True)[0]
    return Feasibility(violation is None, violation)


def schedule_distance(s: Schedule, net: Network, cfg: SimConfig | None = None) -> float:
    """Remaining driving distance from the planning origin through all stops.

    ``cfg`` supplies the boarding time, which only matters when legs fall into
    different hourly snapshots.
    """
    return _evaluate(s, s.stops, IntegrationMode.FULL, net, cfg or _DEFAULT_CFG, diagnose=True)[1]


def objective(s: Schedule, net: Network, cfg: SimConfig) -> float:
    return schedule_distance(s, net, cfg) - cfg.assignment_reward * s.n_requests


def timed(s: Schedule, stops, mode, net, cfg) -> Schedule:
    """Return ``s`` with ``stops`` and planned times filled in."""
    _, _, arr, dep = _evaluate(s, stops, mode, net, cfg, diagnose=True, times=True)
    new_stops = tuple(replace(st, planned_arrival_s=a, planned_departure_s=d)
                      for st, a, d in zip(stops, arr, dep))
    return replace(s, stops=new_stops)


# -- insertion ----------------------------------------------------------------

def _static_leg_distances(s: Schedule, net: Network):
    """Distance of each existing leg (start->stop0, stop0->stop1, ...)."""
    nodes = [s.start_node] + [st.node for st in s.stops]
    travel = net.travel
    return nodes, [travel(nodes[k], nodes[k + 1], 0.0)[1] for k in range(len(nodes) - 1)]


def _best(s: Schedule, a: Stop, b: Stop | None, mode, net: Network, cfg: SimConfig,
          first: int = 0, max_added: float | None = None, latest_a: float | None = None) -> Schedule | None:
    """Enumerate every placement of ``a`` (and ``b`` after it) into the gaps of
    ``s.stops`` and return the feasible one with the least distance.

    Placements are tried in (gap of a, gap of b) order and the first one wins
    ties. Co-located neighbouring stops are merged. ``max_added`` drops
    placements whose added distance is not below it, with 1e-6 m slack for
    rounding; it is only applied when path distances do not depend on the
    hour, where the local delta is exact. Callers re-check the budget.
    ``latest_a`` drops placements where ``a`` is reached later than that.
    """
    stops = s.stops
    n = len(stops)
    static = max_added is not None and net.static_distance
    if static:
        nodes, legs = _static_leg_distances(s, net)
        limit = max_added + 1e-6

        def dd(x, y):
            return net.travel(x, y, 0.0)[1]

    arr = dep = None
    if latest_a is not None:
        _, _, arr, dep = _evaluate(s, stops, mode, net, cfg, diagnose=True, times=True)
    best = None
    best_d = float("inf")
    for i in range(first, n + 1):
        if latest_a is not None:
            if i > 0 and stops[i - 1].node == a.node:
                reach = arr[i - 1]
            elif i > 0:
                reach = dep[i - 1] + net.travel(stops[i - 1].node, a.node, dep[i - 1])[0]
            else:
                reach = s.start_time_s + net.travel(s.start_node, a.node, s.start_time_s)[0]
            if reach > latest_a + TIME_EPS:
                continue
        head = stops[:i] + (a,)
        if b is None:
            if static:
                prev = nodes[i]
                add_a = dd(prev, a.node) + (dd(a.node, nodes[i + 1]) - legs[i] if i < n else 0.0)
                if add_a >= limit:
                    continue
            seqs = ((head + stops[i:]),)
        else:
            seqs = []
            if static:
                prev = nodes[i]
                add_a = dd(prev, a.node) + (dd(a.node, nodes[i + 1]) - legs[i] if i < n else 0.0)
            for j in range(i, n + 1):
                if static:
                    if j == i:
                        add = dd(prev, a.node) + dd(a.node, b.node)
                        if i < n:
                            add += dd(b.node, nodes[i + 1]) - legs[i]
                    else:
                        add = add_a + dd(nodes[j], b.node)
                        if j < n:
                            add += dd(b.node, nodes[j + 1]) - legs[j]
                    if add >= limit:
                        continue
                seqs.append(head + stops[i:j] + (b,) + stops[j:])
        for seq in seqs:
            seq = _merge_adjacent(seq)
            violation, d, _, _ = _evaluate(s, seq, mode, net, cfg)
            if violation is None and d < best_d:
                best, best_d = seq, d
    if best is None:
        return None
    return timed(s, tuple(best), mode, net, cfg)


def insert_customer(s: Schedule, r: CustomerRequest, mode, net: Network, cfg: SimConfig) -> Schedule | None:
    """Best feasible insertion of pick-up and drop-off of ``r`` into ``s``."""
    if r.id in s.customers:
        raise ValueError(f"customer {r.id} already in schedule")
    new = replace(s, customers={**s.customers, r.id: r})
    pu = Stop(r.origin, board_customers=frozenset((r.id,)))
    do = Stop(r.destination, alight_customers=frozenset((r.id,)))
    return _best(new, pu, do, mode, net, cfg, latest_a=r.request_time_s + cfg.max_wait_s)


def insert_parcel(s: Schedule, p: ParcelRequest, mode, net: Network, cfg: SimConfig,
                  max_added: float | None = None) -> Schedule | None:
    """Best feasible insertion of both parcel stops."""
    if p.id in s.parcels:
        raise ValueError(f"parcel {p.id} already in schedule")
    new = replace(s, parcels={**s.parcels, p.id: p})
    pu = Stop(p.origin, board_parcels=frozenset((p.id,)))
    do = Stop(p.destination, alight_parcels=frozenset((p.id,)))
    return _best(new, pu, do, mode, net, cfg, max_added=max_added)


def insert_parcel_origin(s: Schedule, p: ParcelRequest, mode, net: Network, cfg: SimConfig,
                         max_added: float | None = None) -> Schedule | None:
    """Best feasible insertion of the parcel pick-up only; the parcel then
    stays in the schedule as picked-up-but-undelivered."""
    if p.id in s.parcels:
        raise ValueError(f"parcel {p.id} already in schedule")
    new = replace(s, parcels={**s.parcels, p.id: p})
    pu = Stop(p.origin, board_parcels=frozenset((p.id,)))
    return _best(new, pu, None, mode, net, cfg, max_added=max_added)


def insert_parcel_destination(s: Schedule, p: ParcelRequest, mode, net: Network, cfg: SimConfig,
                              max_added: float | None = None) -> Schedule | None:
    """Best feasible drop-off insertion for a parcel already picked up or with
    a scheduled pick-up on this vehicle."""
    if p.id not in s.parcels:
        raise ValueError(f"parcel {p.id} is not assigned to this schedule")
    if s.dropoff_scheduled(p.id):
        raise ValueError(f"parcel {p.id} already has a drop-off")
    first = 0
    if p.id not in s.onboard_parcels:
        first = 1 + next(i for i, st in enumerate(s.stops) if p.id in st.board_parcels)
    do = Stop(p.destination, alight_parcels=frozenset((p.id,)))
    return _best(s, do, None, mode, net, cfg, first=first, max_added=max_added)
