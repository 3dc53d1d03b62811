"""Status-quo logistics: depot-based truck tours.

Parcels are grouped by their depot and inserted one at a time (id order) at
the cheapest position of any open tour of that depot. A new tour is opened
when that is strictly cheaper or when no tour can take the parcel. Tours
start and end at the depot; deliveries are loaded at the start and pick-ups
collected on the way, so the load at every point of the tour is checked
against the truck capacity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .demand import DemandError, ParcelRequest
from .network import Network

LOG = logging.getLogger(__name__)

ROUTE_HEADER = "depot,route_index,seq,node,parcel_id"


@dataclass
class TruckRoute:
    depot: str
    stops: list = field(default_factory=list)  # (node, ParcelRequest)
    distance_m: float = 0.0

    def load_profile(self) -> list[int]:
        """Load on leaving the depot and after each stop."""
        load = sum(p.size for _, p in self.stops if p.origin == self.depot)
        out = [load]
        for _, p in self.stops:
            load += p.size if p.destination == self.depot else -p.size
            out.append(load)
        return out

    def nodes(self) -> list[str]:
        return [self.depot] + [n for n, _ in self.stops] + [self.depot]


def _depot_of(p: ParcelRequest, net: Network) -> tuple[str, str]:
    if p.origin in net.depots and p.destination not in net.depots:
        return p.origin, p.destination
    if p.destination in net.depots and p.origin not in net.depots:
        return p.destination, p.origin
    raise DemandError(f"parcel {p.id}: exactly one endpoint must be a depot")


def route_distance(nodes, net: Network, t: float = 0.0) -> float:
    return sum(net.travel(a, b, t)[1] for a, b in zip(nodes, nodes[1:]))


def _fits(stops, depot, capacity) -> bool:
    load = sum(p.size for _, p in stops if p.origin == depot)
    if load > capacity:
        return False
    for _, p in stops:
        load += p.size if p.destination == depot else -p.size
        if load > capacity:
            return False
    return True


def route_logistics(parcels, net: Network, truck_capacity: int, hour: int = 0) -> tuple[list[TruckRoute], float]:
    """Build truck tours for ``parcels``; returns the tours and total km."""
    t = hour * 3600.0

    def d(a, b):
        return net.travel(a, b, t)[1]

    routes: dict[str, list[TruckRoute]] = {}
    for p in sorted(parcels, key=lambda p: p.id):
        depot, node = _depot_of(p, net)
        if p.size > truck_capacity:
            raise DemandError(f"parcel {p.id} larger than the truck capacity")
        best = None  # (added, route, position)
        for route in routes.get(depot, []):
            seq = route.nodes()
            for i in range(len(route.stops) + 1):
                added = d(seq[i], node) + d(node, seq[i + 1]) - d(seq[i], seq[i + 1])
                if best is not None and added >= best[0]:
                    continue
                cand = route.stops[:i] + [(node, p)] + route.stops[i:]
                if _fits(cand, depot, truck_capacity):
                    best = (added, route, i)
        fresh = d(depot, node) + d(node, depot)
        if best is None or fresh < best[0]:
            routes.setdefault(depot, []).append(TruckRoute(depot, [(node, p)]))
        else:
            _, route, i = best
            route.stops.insert(i, (node, p))
    out = []
    for depot in sorted(routes):
        for r in routes[depot]:
            r.distance_m = route_distance(r.nodes(), net, t)
            out.append(r)
    total_km = sum(r.distance_m for r in out) / 1000.0
    LOG.debug("logistics: %d tours, %.3f km", len(out), total_km)
    return out, total_km


def write_routes(routes, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(ROUTE_HEADER + "\n")
        index: dict[str, int] = {}
        for r in routes:
            k = index.get(r.depot, 0)
            index[r.depot] = k + 1
            rows = [(r.depot, "")] + [(n, str(p.id)) for n, p in r.stops] + [(r.depot, "")]
            for seq, (node, pid) in enumerate(rows):
                fh.write(f"{r.depot},{k},{seq},{node},{pid}\n")
