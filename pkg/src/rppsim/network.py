"""Road network storage and time-dependent fastest-path queries.

Travel times are given per edge for each hour of the day. A query departing at
time ``t`` is answered on the snapshot of hour ``t // 3600 mod 24`` for the
whole path. Fastest paths are computed lazily per (snapshot, destination) with a
reverse Dijkstra and cached; among equal-time paths the lexicographically
smallest node sequence is returned.
"""
from __future__ import annotations

import csv
import heapq
import logging
from dataclasses import dataclass
from pathlib import Path

LOG = logging.getLogger(__name__)

HOURS = 24
# relative tolerance used to detect equal-time paths
_TIE_EPS = 1e-9


class NetworkError(ValueError):
    """Malformed or invalid network input."""


class NoPathError(LookupError):
    pass


def hour_of(t: float) -> int:
    return int(t // 3600) % HOURS


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    length_m: float
    travel_time_s: tuple[float, ...]


@dataclass(frozen=True)
class Route:
    node_sequence: tuple[str, ...]
    travel_time_s: float
    distance_m: float
    depart_time_s: float


class Network:
    """Directed road graph with hourly travel times, zones and parcel depots.

    Immutable after construction apart from internal path caches.
    """

    def __init__(self, nodes, edges, zones, depots):
        self.nodes: tuple[str, ...] = tuple(sorted(nodes))
        self.index = {n: i for i, n in enumerate(self.nodes)}
        if len(self.index) != len(list(nodes)):
            raise NetworkError("duplicate node ids")
        self.edges: dict[tuple[str, str], Edge] = {}
        for e in edges:
            self._add_edge(e)
        self.zones: dict[str, str] = dict(zones)
        self.depots: frozenset[str] = frozenset(depots)
        self._validate()

        n = len(self.nodes)
        # reverse adjacency: target index -> list of (source index, edge)
        self._radj: list[list[tuple[int, Edge]]] = [[] for _ in range(n)]
        for e in self.edges.values():
            self._radj[self.index[e.target]].append((self.index[e.source], e))
        # forward adjacency: source index -> list of (target index, edge)
        self._fadj: list[list[tuple[int, Edge]]] = [[] for _ in range(n)]
        for e in self.edges.values():
            self._fadj[self.index[e.source]].append((self.index[e.target], e))
        for lst in self._radj + self._fadj:
            lst.sort(key=lambda x: x[0])

        # hours with identical travel-time vectors share one snapshot
        self._hour_class: list[int] = []
        signatures: dict[tuple, int] = {}
        ordered = [self.edges[k] for k in sorted(self.edges)]
        for h in range(HOURS):
            sig = tuple(e.travel_time_s[h] for e in ordered)
            self._hour_class.append(signatures.setdefault(sig, len(signatures)))
        self._n_classes = len(signatures)
        # per class: dest index -> (time-to-dest, dist-to-dest, next hop)
        self._cols: list[dict[int, tuple[list, list, list]]] = [{} for _ in range(self._n_classes)]
        self._lb_cols: dict[int, list[float]] = {}
        self._static_distance: bool | None = None
        self._zone_members: dict[str, tuple[str, ...]] | None = None

    # -- construction helpers -------------------------------------------------
    def _add_edge(self, e: Edge):
        key = (e.source, e.target)
        if key in self.edges:
            raise NetworkError(f"duplicate edge {e.source}->{e.target}")
        if e.source not in self.index or e.target not in self.index:
            raise NetworkError(f"edge {e.source}->{e.target} references unknown node")
        if e.source == e.target:
            raise NetworkError(f"self loop at {e.source}")
        if not e.length_m > 0:
            raise NetworkError(f"edge {e.source}->{e.target} has non-positive length")
        if len(e.travel_time_s) != HOURS:
            raise NetworkError(f"edge {e.source}->{e.target} needs {HOURS} hourly travel times")
        if any(not tt > 0 for tt in e.travel_time_s):
            raise NetworkError(f"edge {e.source}->{e.target} has non-positive travel time")
        self.edges[key] = e

    def _validate(self):
        missing = [n for n in self.nodes if n not in self.zones]
        if missing:
            raise NetworkError(f"nodes without zone: {missing[:5]}")
        unknown = [n for n in self.zones if n not in self.index]
        if unknown:
            raise NetworkError(f"zone file references unknown nodes: {unknown[:5]}")
        bad_depots = [d for d in self.depots if d not in self.index]
        if bad_depots:
            raise NetworkError(f"depot file references unknown nodes: {bad_depots}")
        if not self.nodes:
            raise NetworkError("empty network")
        fwd: dict[str, list[str]] = {n: [] for n in self.nodes}
        bwd: dict[str, list[str]] = {n: [] for n in self.nodes}
        for (a, b) in self.edges:
            fwd[a].append(b)
            bwd[b].append(a)
        root = self.nodes[0]
        for adj in (fwd, bwd):
            seen = {root}
            stack = [root]
            while stack:
                for m in adj[stack.pop()]:
                    if m not in seen:
                        seen.add(m)
                        stack.append(m)
            if len(seen) != len(self.nodes):
                lost = sorted(set(self.nodes) - seen)[:5]
                raise NetworkError(f"network is not strongly connected (e.g. {lost})")

    # -- path tables ----------------------------------------------------------
    def _column(self, cls: int, dest: int):
        col = self._cols[cls].get(dest)
        if col is None:
            col = self._build_column(cls, dest)
            self._cols[cls][dest] = col
        return col

    def _build_column(self, cls: int, dest: int):
        hour = self._hour_class.index(cls)
        n = len(self.nodes)
        inf = float("inf")
        T = [inf] * n
        T[dest] = 0.0
        heap = [(0.0, dest)]
        order = []
        done = [False] * n
        while heap:
            t, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            order.append(u)
            for v, e in self._radj[u]:
                nt = t + e.travel_time_s[hour]
                if nt < T[v]:
                    T[v] = nt
                    heapq.heappush(heap, (nt, v))
        # next hop: smallest node id among successors on a min-time path
        nxt = [-1] * n
        D = [inf] * n
        D[dest] = 0.0
        for v in order:
            if v == dest:
                continue
            tv = T[v]
            best = -1
            best_e = None
            for u, e in self._fadj[v]:
                if abs(e.travel_time_s[hour] + T[u] - tv) <= _TIE_EPS * max(1.0, tv):
                    best, best_e = u, e
                    break
            nxt[v] = best
            D[v] = best_e.length_m + D[best]
        return T, D, nxt

    def travel(self, origin: str, dest: str, depart_time_s: float) -> tuple[float, float]:
        """(time, distance) of the fastest path; cheap cached lookup."""
        if origin == dest:
            return 0.0, 0.0
        T, D, _ = self._column(self._hour_class[int(depart_time_s // 3600) % HOURS], self.index[dest])
        i = self.index[origin]
        tt = T[i]
        if tt == float("inf"):
            raise NoPathError(f"no path {origin}->{dest}")
        return tt, D[i]

    def min_travel_time(self, origin: str, dest: str) -> float:
        """Lower bound on the travel time origin->dest over any chain of legs
        departing at any hours (shortest path on per-edge minimum times)."""
        if origin == dest:
            return 0.0
        di = self.index[dest]
        col = self._lb_cols.get(di)
        if col is None:
            col = [float("inf")] * len(self.nodes)
            col[di] = 0.0
            heap = [(0.0, di)]
            while heap:
                t, u = heapq.heappop(heap)
                if t > col[u]:
                    continue
                for v, e in self._radj[u]:
                    nt = t + min(e.travel_time_s)
                    if nt < col[v]:
                        col[v] = nt
                        heapq.heappush(heap, (nt, v))
            self._lb_cols[di] = col
        return col[self.index[origin]]

    def edge_time(self, a: str, b: str, hour: int) -> float:
        return self.edges[(a, b)].travel_time_s[hour]

    def edge_length(self, a: str, b: str) -> float:
        return self.edges[(a, b)].length_m

    @property
    def static_distance(self) -> bool:
        """True if fastest-path distances do not depend on the hour."""
        if self._static_distance is None:
            if self._n_classes == 1:
                self._static_distance = True
            else:
                ref = None
                same = True
                for cls in range(self._n_classes):
                    mats = [self._column(cls, d)[1] for d in range(len(self.nodes))]
                    if ref is None:
                        ref = mats
                    elif mats != ref:
                        same = False
                        break
                self._static_distance = same
        return self._static_distance

    def zone_members(self) -> dict[str, tuple[str, ...]]:
        if self._zone_members is None:
            members: dict[str, list[str]] = {}
            for n in self.nodes:
                members.setdefault(self.zones[n], []).append(n)
            self._zone_members = {z: tuple(v) for z, v in sorted(members.items())}
        return self._zone_members

    def __repr__(self):
        return f"Network({len(self.nodes)} nodes, {len(self.edges)} edges, {len(self.depots)} depots)"


def fastest_path(net: Network, origin: str, dest: str, depart_time_s: float) -> Route:
    for n in (origin, dest):
        if n not in net.index:
            raise KeyError(f"unknown node {n}")
    if origin == dest:
        return Route((origin,), 0.0, 0.0, depart_time_s)
    hour = hour_of(depart_time_s)
    _, _, nxt = net._column(net._hour_class[hour], net.index[dest])
    seq = [origin]
    i = net.index[origin]
    d = net.index[dest]
    if nxt[i] < 0:
        raise NoPathError(f"no path {origin}->{dest}")
    tt = 0.0
    dist = 0.0
    while i != d:
        j = nxt[i]
        e = net.edges[(net.nodes[i], net.nodes[j])]
        tt += e.travel_time_s[hour]
        dist += e.length_m
        seq.append(net.nodes[j])
        i = j
    return Route(tuple(seq), tt, dist, depart_time_s)


def direct_metrics(net: Network, origin: str, dest: str, depart_time_s: float) -> tuple[float, float]:
    """Fastest-path travel time and the distance of that same path."""
    for n in (origin, dest):
        if n not in net.index:
            raise KeyError(f"unknown node {n}")
    return net.travel(origin, dest, depart_time_s)


# -- file io ------------------------------------------------------------------

def _read_rows(path, expected: list[str]):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NetworkError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[: len(expected)] != expected:
            raise NetworkError(f"{path}: expected header starting with {expected}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise NetworkError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def load_network(node_file, edge_file, zone_file, depot_file) -> Network:
    nodes = [row[0] for _, row in _read_rows(node_file, ["node_id"])]
    tt_cols = [f"tt_h{h}" for h in range(HOURS)]
    edges = []
    for lineno, row in _read_rows(edge_file, ["from", "to", "length_m"] + tt_cols):
        try:
            length = float(row[2])
            tts = tuple(float(x) for x in row[3:])
        except ValueError as exc:
            raise NetworkError(f"{edge_file}:{lineno}: {exc}") from None
        edges.append(Edge(row[0], row[1], length, tts))
    zones = {}
    for lineno, row in _read_rows(zone_file, ["node_id", "zone_id"]):
        if row[0] in zones:
            raise NetworkError(f"{zone_file}:{lineno}: node {row[0]} assigned to two zones")
        zones[row[0]] = row[1]
    depots = [row[0] for _, row in _read_rows(depot_file, ["node_id"])]
    net = Network(nodes, edges, zones, depots)
    LOG.info("loaded %r", net)
    return net


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_network(net: Network, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / f"{k}.csv" for k in ("nodes", "edges", "zones", "depots")}
    with paths["nodes"].open("w", newline="", encoding="utf-8") as fh:
        fh.write("node_id\n")
        for n in net.nodes:
            fh.write(f"{n}\n")
    with paths["edges"].open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["from", "to", "length_m"] + [f"tt_h{h}" for h in range(HOURS)]) + "\n")
        for key in sorted(net.edges):
            e = net.edges[key]
            fh.write(",".join([e.source, e.target, _num(e.length_m)] + [_num(t) for t in e.travel_time_s]) + "\n")
    with paths["zones"].open("w", newline="", encoding="utf-8") as fh:
        fh.write("node_id,zone_id\n")
        for n in net.nodes:
            fh.write(f"{n},{net.zones[n]}\n")
    with paths["depots"].open("w", newline="", encoding="utf-8") as fh:
        fh.write("node_id\n")
        for d in sorted(net.depots):
            fh.write(f"{d}\n")
    return paths


def load_network_dir(directory) -> Network:
    d = Path(directory)
    return load_network(d / "nodes.csv", d / "edges.csv", d / "zones.csv", d / "depots.csv")
