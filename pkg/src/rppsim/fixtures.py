"""Synthetic networks and demand used by tests, examples and benchmarks.

LINE4
    nodes n0..n3 on a line, both directions, 1000 m and 60 s per edge at every
    hour, depot n0, one zone per node.
LINE4-TD
    LINE4 topology with 60 s per edge for hours 0-11 and 120 s for 12-23.
GRID k
    k x k lattice, 500 m edges in both directions, 60 s off-peak and 75 s in
    the peak hours 7, 8, 16, 17 (uniform scaling, so fastest paths and their
    distances do not change with the hour). Zones are square blocks of
    ``max(1, k // 5)`` nodes per side (25 zones for k = 5 and k = 10). Two
    depots, one in the north and one in the east of the grid.

GRID demand: a deterministic gravity OD matrix with a two-peak daily profile,
scaled to ``daily_trips`` per day, and ``n_raw_parcels`` raw delivery records
drawn uniformly over non-depot nodes from the two depots (seeded).
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .demand import OdMatrixSet, RawParcel, write_od, write_raw_parcels
from .network import HOURS, Edge, Network, write_network

PEAK_HOURS = (7, 8, 16, 17)

# relative hourly demand, two peaks
DAY_PROFILE = (
    0.2, 0.1, 0.1, 0.1, 0.2, 0.5, 1.2, 2.2, 2.4, 1.6, 1.3, 1.3,
    1.4, 1.3, 1.3, 1.6, 2.1, 2.3, 1.9, 1.4, 1.0, 0.8, 0.6, 0.4,
)


def line4(time_dependent: bool = False) -> Network:
    nodes = [f"n{i}" for i in range(4)]
    if time_dependent:
        tts = tuple(60.0 if h < 12 else 120.0 for h in range(HOURS))
    else:
        tts = (60.0,) * HOURS
    edges = []
    for i in range(3):
        edges.append(Edge(nodes[i], nodes[i + 1], 1000.0, tts))
        edges.append(Edge(nodes[i + 1], nodes[i], 1000.0, tts))
    zones = {n: f"z{i}" for i, n in enumerate(nodes)}
    return Network(nodes, edges, zones, ["n0"])


def grid_node(r: int, c: int) -> str:
    return f"g{r:02d}_{c:02d}"


def grid(k: int, edge_m: float = 500.0, base_s: float = 60.0, peak_s: float = 75.0) -> Network:
    if k < 2:
        raise ValueError("grid needs k >= 2")
    tts = tuple(peak_s if h in PEAK_HOURS else base_s for h in range(HOURS))
    nodes = [grid_node(r, c) for r in range(k) for c in range(k)]
    edges = []
    for r in range(k):
        for c in range(k):
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr < k and cc < k:
                    edges.append(Edge(grid_node(r, c), grid_node(rr, cc), edge_m, tts))
                    edges.append(Edge(grid_node(rr, cc), grid_node(r, c), edge_m, tts))
    b = max(1, k // 5)
    zones = {grid_node(r, c): f"z{r // b:02d}_{c // b:02d}" for r in range(k) for c in range(k)}
    depots = grid_depots(k)
    return Network(nodes, edges, zones, depots)


def grid_depots(k: int) -> list[str]:
    north = grid_node(min(1, k - 1), k // 2)
    east = grid_node(k // 2, max(0, k - 2))
    return sorted({north, east})


def grid_od(net: Network, daily_trips: float, decay_m: float = 2000.0) -> OdMatrixSet:
    """Gravity OD matrix over the zones of a grid network, ``daily_trips``
    expected trips in total (before penetration)."""
    members = net.zone_members()
    centre = {}
    for z, nodes in members.items():
        rc = [tuple(int(x) for x in n[1:].split("_")) for n in nodes]
        centre[z] = (sum(r for r, _ in rc) / len(rc), sum(c for _, c in rc) / len(rc))
    edge_m = next(iter(net.edges.values())).length_m
    weights = {}
    for a in members:
        for b in members:
            if a == b and len(members[a]) < 2:
                continue
            ra, ca = centre[a]
            rb, cb = centre[b]
            dist = (abs(ra - rb) + abs(ca - cb)) * edge_m
            # short trips are unattractive for a pooling service
            w = math.exp(-dist / decay_m) * (0.3 if a == b else 1.0)
            weights[(a, b)] = w
    wsum = sum(weights.values())
    psum = sum(DAY_PROFILE)
    od = OdMatrixSet()
    for h in range(HOURS):
        for (a, b), w in sorted(weights.items()):
            od.set(h, a, b, round(daily_trips * DAY_PROFILE[h] / psum * w / wsum, 6))
    return od


def line4_od(trips_per_hour: float = 1.0) -> OdMatrixSet:
    od = OdMatrixSet()
    for h in range(HOURS):
        od.set(h, "z0", "z3", trips_per_hour)
        od.set(h, "z3", "z0", trips_per_hour)
        od.set(h, "z1", "z2", trips_per_hour / 2)
    return od


def raw_parcels(net: Network, n: int, seed: int = 0) -> list[RawParcel]:
    rng = np.random.default_rng(seed)
    depots = sorted(net.depots)
    targets = [x for x in net.nodes if x not in net.depots]
    out = []
    for i in range(n):
        depot = depots[i % len(depots)]
        out.append(RawParcel(depot, targets[int(rng.integers(len(targets)))], "delivery"))
    return out


FIXTURES = ("LINE4", "LINE4-TD", "GRID")


def generate(name: str, out_dir, k: int = 10, daily_trips: float | None = None,
             n_raw_parcels: int | None = None, seed: int = 0) -> dict[str, Path]:
    """Write network, OD matrix and raw parcel files for a named fixture."""
    out = Path(out_dir)
    name = name.upper()
    if name in ("LINE4", "LINE4-TD"):
        net = line4(time_dependent=name.endswith("TD"))
        od = line4_od(1.0 if daily_trips is None else daily_trips / 60.0)
        raw = raw_parcels(net, 20 if n_raw_parcels is None else n_raw_parcels, seed)
    elif name == "GRID":
        net = grid(k)
        od = grid_od(net, 10_000.0 if daily_trips is None else daily_trips)
        raw = raw_parcels(net, 500 if n_raw_parcels is None else n_raw_parcels, seed)
    else:
        raise ValueError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    paths = write_network(net, out)
    paths["od"] = out / "od.csv"
    paths["parcels_raw"] = out / "parcels_raw.csv"
    write_od(od, paths["od"])
    write_raw_parcels(raw, paths["parcels_raw"])
    return paths


def desk_scenario(seed: int = 0, k: int = 10, daily_trips: float = 10_000.0, penetration: float = 0.05,
                  n_raw_parcels: int = 500, parcel_share: float = 0.1, cap_parcels: int = 8):
    """GRID k x k with sampled customers (about 500 at the defaults) and
    aggregated parcel requests (about 50)."""
    from .demand import build_parcels, sample_customers

    net = grid(k)
    od = grid_od(net, daily_trips)
    customers = sample_customers(od, net, penetration, seed)
    parcels = build_parcels(raw_parcels(net, n_raw_parcels, seed), parcel_share, cap_parcels, seed)
    return net, od, customers, parcels
