"""Post-run audits: service constraints replayed from the event log, parcel
budget inequalities from the strategy audit log, and odometer accounting."""
from __future__ import annotations

from collections import defaultdict

from .config import IntegrationMode, SimConfig
from .strategies import FORCE

EPS = 1e-6


def audit_events(events, customers, parcels, net, cfg: SimConfig) -> list[str]:
    """Return a list of human-readable violations (empty when clean)."""
    out = []
    req = {c.id: c for c in customers}
    size = {p.id: p.size for p in parcels}
    limit = cfg.max_travel_factor
    pickup_t, dropoff_t = {}, {}
    aboard_c: dict = defaultdict(set)
    aboard_p: dict = defaultdict(set)
    parcel_state: dict = {}
    moderate = cfg.mode == IntegrationMode.MODERATE
    # group vehicle events into stops: same vehicle, time and node
    stops: dict = defaultdict(list)
    order = []
    for t, kind, rid, vid, node in events:
        if kind in ("pickup", "dropoff", "parcel_pickup", "parcel_dropoff"):
            key = (vid, t, node)
            if key not in stops:
                order.append(key)
            stops[key].append((kind, rid))
        elif kind == "parcel_request":
            if rid in parcel_state:
                out.append(f"parcel {rid}: requested twice")
            parcel_state[rid] = "requested"
        elif kind == "parcel_assign":
            if parcel_state.get(rid) != "requested":
                out.append(f"parcel {rid}: assigned from state {parcel_state.get(rid)}")
            parcel_state[rid] = "assigned"
        elif kind == "parcel_dropoff_assign":
            if parcel_state.get(rid) not in ("assigned", "onboard"):
                out.append(f"parcel {rid}: drop-off assigned from state {parcel_state.get(rid)}")
    for key in order:
        vid, t, node = key
        acts = stops[key]
        has_customer = any(k in ("pickup", "dropoff") for k, _ in acts)
        if moderate and aboard_c[vid] and not has_customer:
            out.append(f"vehicle {vid} t={t}: parcel-only stop at {node} with passengers aboard")
        # alighting happens before boarding at a stop
        for kind, rid in sorted(acts, key=lambda a: a[0] not in ("dropoff", "parcel_dropoff")):
            if kind == "dropoff":
                if rid not in aboard_c[vid]:
                    out.append(f"customer {rid}: drop-off without pick-up on vehicle {vid}")
                    continue
                aboard_c[vid].discard(rid)
                dropoff_t[rid] = t
                c = req[rid]
                if node != c.destination:
                    out.append(f"customer {rid}: dropped at {node}, wanted {c.destination}")
                direct = net.travel(c.origin, c.destination, c.request_time_s)[0]
                ride = t - pickup_t[rid] - cfg.boarding_time_s
                if ride > limit * direct + EPS:
                    out.append(f"customer {rid}: in-vehicle {ride} s > {limit} x {direct} s")
            elif kind == "pickup":
                c = req[rid]
                if rid in pickup_t:
                    out.append(f"customer {rid}: picked up twice")
                pickup_t[rid] = t
                aboard_c[vid].add(rid)
                if node != c.origin:
                    out.append(f"customer {rid}: picked up at {node}, wanted {c.origin}")
                if t - c.request_time_s > cfg.max_wait_s + EPS:
                    out.append(f"customer {rid}: wait {t - c.request_time_s} s > {cfg.max_wait_s} s")
                if t < c.request_time_s:
                    out.append(f"customer {rid}: picked up before the request")
            elif kind == "parcel_pickup":
                if parcel_state.get(rid) != "assigned":
                    out.append(f"parcel {rid}: picked up from state {parcel_state.get(rid)}")
                parcel_state[rid] = "onboard"
                aboard_p[vid].add(rid)
            elif kind == "parcel_dropoff":
                if rid not in aboard_p[vid]:
                    out.append(f"parcel {rid}: delivered without pick-up on vehicle {vid}")
                    continue
                aboard_p[vid].discard(rid)
                parcel_state[rid] = "delivered"
        if len(aboard_c[vid]) > cfg.cap_customers:
            out.append(f"vehicle {vid} t={t}: {len(aboard_c[vid])} passengers aboard")
        load = sum(size.get(p, 1) for p in aboard_p[vid])
        if load > cfg.cap_parcels:
            out.append(f"vehicle {vid} t={t}: parcel load {load}")
    for rid in pickup_t:
        if rid not in dropoff_t:
            out.append(f"customer {rid}: never dropped off")
    return out


def audit_thresholds(rows, threshold: float) -> list[str]:
    """Every committed threshold decision must satisfy its budget strictly;
    with ``threshold == 1`` no committed decision may add distance."""
    out = []
    for r in rows:
        if not r.committed or r.strategy == FORCE:
            continue
        added = r.d_new_m - r.d_old_m
        if not r.accepted or not added < r.budget_m:
            out.append(f"t={r.t} {r.strategy} parcel {r.parcel_id}: added {added} not below budget {r.budget_m}")
        if threshold == 1.0 and added > 0:
            out.append(f"t={r.t} {r.strategy} parcel {r.parcel_id}: added {added} > 0 at threshold 1")
    return out


def undelivered_picked_up(events) -> set:
    picked, delivered = set(), set()
    for _, kind, rid, _, _ in events:
        if kind == "parcel_pickup":
            picked.add(rid)
        elif kind == "parcel_dropoff":
            delivered.add(rid)
    return picked - delivered


def odometer_check(trace, odometer_m: dict) -> list[str]:
    total = defaultdict(float)
    for _, vid, _, _, length in trace:
        total[vid] += length
    out = []
    for vid, odo in odometer_m.items():
        if abs(total.get(vid, 0.0) - odo) >= 0.5:
            out.append(f"vehicle {vid}: odometer {odo} m, edges {total.get(vid, 0.0)} m")
    return out
