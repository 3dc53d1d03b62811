"""Idle-vehicle re-balancing.

Every repositioning period the expected number of new requests per origin zone
is read from the OD matrices. Idle vehicles are shared out over the zones in
proportion to that forecast (largest remainder rounding); zones holding more
idle vehicles than their share send the surplus to zones short of vehicles.
Which zone sends how many vehicles where is a transportation problem with
zone-centroid travel times as costs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .demand import OdMatrixSet
from .network import HOURS, Network

LOG = logging.getLogger(__name__)

REBALANCE_HEADER = "t,vehicle_id,from_zone,to_zone,target_node"


@dataclass(frozen=True)
class Move:
    t: float
    vehicle_id: int
    from_zone: str
    to_zone: str
    target_node: str


def forecast(od: OdMatrixSet, penetration: float, t: float, horizon: float) -> dict[str, float]:
    """Expected requests per origin zone in ``[t, t + horizon)``.

    Matrix entries are trips per hour; the window may span hour boundaries
    and wraps around midnight.
    """
    out: dict[str, float] = {}
    for z in od.zones():
        out.setdefault(z, 0.0)
    end = t + horizon
    cur = t
    while cur < end:
        h = int(cur // 3600)
        nxt = min(end, (h + 1) * 3600.0)
        frac = (nxt - cur) / 3600.0
        for (a, _), trips in od.items(h % HOURS):
            out[a] += trips * penetration * frac
        cur = nxt
    return out


def largest_remainder(total: int, weights: dict) -> dict:
    """Split ``total`` into integers proportional to ``weights``; leftover
    units go to the largest fractional parts (ties by key)."""
    wsum = sum(weights.values())
    if total <= 0 or wsum <= 0:
        return {k: 0 for k in weights}
    exact = {k: total * w / wsum for k, w in weights.items()}
    out = {k: math.floor(x) for k, x in exact.items()}
    left = total - sum(out.values())
    for k in sorted(exact, key=lambda k: (-(exact[k] - out[k]), k))[:left]:
        out[k] += 1
    return out


def solve_transport(supply: dict, demand: dict, cost) -> tuple[dict, float]:
    """Balanced transportation problem with unit flows.

    ``supply`` and ``demand`` map zone -> integer count with equal totals;
    ``cost(a, b)`` is the cost of one unit from a to b. Returns the flow map
    ``{(a, b): n}`` and the total cost.
    """
    rows = [a for a in sorted(supply) for _ in range(supply[a])]
    cols = [b for b in sorted(demand) for _ in range(demand[b])]
    if len(rows) != len(cols):
        raise ValueError("transport problem is not balanced")
    if not rows:
        return {}, 0.0
    ua = sorted(supply)
    ub = sorted(demand)
    zc = {(a, b): cost(a, b) for a in ua for b in ub}
    mat = np.array([[zc[(a, b)] for b in cols] for a in rows], dtype=float)
    ri, ci = linear_sum_assignment(mat)
    flows: dict = {}
    total = 0.0
    for i, j in zip(ri, ci):
        key = (rows[i], cols[j])
        flows[key] = flows.get(key, 0) + 1
        total += zc[key]
    return flows, total


class Rebalancer:
    def __init__(self, net: Network, od: OdMatrixSet, penetration: float, horizon: float):
        self.net = net
        self.od = od
        self.penetration = penetration
        self.horizon = horizon
        self.members = net.zone_members()
        self._centroid = lru_cache(maxsize=None)(self._centroid_uncached)

    def _centroid_uncached(self, zone: str, hour: int) -> str:
        members = self.members[zone]
        t = hour * 3600.0
        best = None
        for n in members:
            total = sum(self.net.travel(n, m, t)[0] for m in members)
            if best is None or total < best[0]:
                best = (total, n)
        return best[1]

    def centroid(self, zone: str, t: float) -> str:
        """Member node with least total travel time to the other members."""
        return self._centroid(zone, int(t // 3600) % HOURS)

    def plan(self, fleet, t: float) -> list[Move]:
        idle: dict[str, list] = {}
        for v in fleet:
            if v.is_idle:
                idle.setdefault(self.net.zones[v.node], []).append(v)
        n_idle = sum(len(vs) for vs in idle.values())
        if n_idle == 0:
            return []
        fc = forecast(self.od, self.penetration, t, self.horizon)
        fc = {z: fc.get(z, 0.0) for z in self.members}
        desired = largest_remainder(n_idle, fc)
        if sum(desired.values()) == 0:
            return []
        supply, demand = {}, {}
        for z in self.members:
            s = len(idle.get(z, ())) - desired[z]
            if s > 0:
                supply[z] = s
            elif s < 0:
                demand[z] = -s
        if not supply:
            return []

        def cost(a, b):
            return self.net.travel(self.centroid(a, t), self.centroid(b, t), t)[0]

        flows, _ = solve_transport(supply, demand, cost)
        moves = []
        for (a, b), n in sorted(flows.items()):
            target = self.centroid(b, t)
            for _ in range(n):
                pool = idle[a]
                v = min(pool, key=lambda v: (self.net.travel(v.node, target, t)[0], v.id))
                pool.remove(v)
                moves.append(Move(t, v.id, a, b, target))
        return moves


def rebalance(fleet, rebalancer: Rebalancer, t: float) -> list[Move]:
    """Plan moves and hand each moved vehicle its repositioning target."""
    moves = rebalancer.plan(fleet, t)
    for m in moves:
        v = fleet[m.vehicle_id]
        v.repo_target = m.target_node
        v.leg = []
        v.invalidate()
        fleet.updated.add(v.id)
    if moves:
        LOG.debug("t=%s rebalance moved %d vehicles", t, len(moves))
    return moves


def write_moves(moves, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(REBALANCE_HEADER + "\n")
        for m in moves:
            fh.write(f"{m.t!r},{m.vehicle_id},{m.from_zone},{m.to_zone},{m.target_node}\n")
