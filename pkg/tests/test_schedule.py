import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import micro_case, oracle_insert, stop_tuple
from rppsim.config import IntegrationMode, SimConfig
from rppsim.demand import CustomerRequest, ParcelRequest
from rppsim.schedule import (
    DETOUR,
    MODERATE,
    PRECEDENCE,
    Schedule,
    Stop,
    insert_customer,
    insert_parcel,
    insert_parcel_destination,
    insert_parcel_origin,
    is_feasible,
    objective,
    schedule_distance,
    timed,
)

FULL = IntegrationMode.FULL
MOD = IntegrationMode.MODERATE


def c(i, o, d, t=0.0):
    return CustomerRequest(i, o, d, t)


def stop(node, bc=(), ac=(), bp=(), ap=()):
    return Stop(node, frozenset(bc), frozenset(ac), frozenset(bp), frozenset(ap))


def test_empty_schedule(net, cfg):
    s = Schedule("n0", 0.0)
    assert is_feasible(s, FULL, net, cfg)
    assert schedule_distance(s, net) == 0
    assert objective(s, net, cfg) == 0


def test_detour_violation_and_moderate(net, cfg):
    # customer n0->n3 with two parcel-only stops in between: in-vehicle
    # 180 + 2 x 60 s = 300 s > 1.4 x 180 = 252 s
    r = c(0, "n0", "n3")
    p = ParcelRequest(1, "n1", "n2")
    stops = (stop("n0", bc=[0]), stop("n1", bp=[1]), stop("n2", ap=[1]), stop("n3", ac=[0]))
    s = Schedule("n0", 0.0, stops, {0: r}, {1: p})
    res = is_feasible(s, FULL, net, cfg)
    assert not res and res.violation == DETOUR
    res = is_feasible(s, MOD, net, cfg)
    assert not res and res.violation == MODERATE
    t = timed(s, stops, FULL, net, cfg)
    assert [x.planned_arrival_s for x in t.stops] == [0, 120, 240, 360]
    assert t.stops[-1].planned_arrival_s - t.stops[0].planned_departure_s == 300


def test_objective_arithmetic(net):
    cfg = SimConfig(assignment_reward=1e7)
    s = Schedule("n0", 0.0, (stop("n0", bc=[0]), stop("n3", ac=[0])), {0: c(0, "n0", "n3")})
    assert objective(s, net, cfg) == 3000 - 1e7
    two = Schedule("n0", 0.0, (stop("n0", bc=[0, 1]), stop("n3", ac=[0, 1])),
                   {0: c(0, "n0", "n3"), 1: c(1, "n0", "n3")})
    assert objective(s, net, cfg) - objective(two, net, cfg) == 1e7


def test_distance_examples(net):
    assert schedule_distance(Schedule("n0", 0.0, (stop("n1"), stop("n3"))), net) == 3000
    assert schedule_distance(Schedule("n0", 0.0, (stop("n2"), stop("n1"), stop("n3"))), net) == 5000


def test_insert_customer_idle_vehicle(net, cfg):
    out = insert_customer(Schedule("n0", 0.0), c(1, "n1", "n3"), FULL, net, cfg)
    assert [stop_tuple(x) for x in out.stops] == [stop_tuple(stop("n1", bc=[1])), stop_tuple(stop("n3", ac=[1]))]
    assert [(x.planned_arrival_s, x.planned_departure_s) for x in out.stops] == [(60, 120), (240, 300)]


def test_insert_customer_full_vehicle(net, cfg):
    aboard = {i: c(i, "n0", "n3") for i in range(4)}
    s = Schedule("n0", 0.0, (stop("n3", ac=range(4)),), aboard, onboard_customers={i: 0.0 for i in range(4)})
    # boarding before n3 overloads the vehicle, boarding after it waits too long
    assert insert_customer(s, c(9, "n1", "n2"), FULL, net, SimConfig(max_wait_s=200)) is None
    assert insert_customer(s, c(9, "n1", "n2"), FULL, net, cfg) is not None


def test_insert_customer_wait_bound(net):
    cfg = SimConfig(max_wait_s=100)
    assert insert_customer(Schedule("n0", 0.0), c(1, "n2", "n3"), FULL, net, cfg) is None
    assert insert_customer(Schedule("n0", 0.0), c(1, "n1", "n3"), FULL, net, cfg) is not None


def test_insert_parcel_empty(net, cfg):
    out = insert_parcel(Schedule("n0", 0.0), ParcelRequest(0, "n0", "n2"), FULL, net, cfg)
    assert [x.node for x in out.stops] == ["n0", "n2"]
    assert schedule_distance(out, net) == 2000


def test_insert_parcel_on_passenger_route(net, cfg):
    old = Schedule("n0", 0.0, (stop("n3", bc=[5]), stop("n2", ac=[5])), {5: c(5, "n3", "n2")})
    p = ParcelRequest(0, "n1", "n2")
    out = insert_parcel(old, p, FULL, net, cfg)
    assert [stop_tuple(x) for x in out.stops] == [stop_tuple(stop("n1", bp=[0])), stop_tuple(stop("n2", ap=[0])),
                                                  stop_tuple(stop("n3", bc=[5])), stop_tuple(stop("n2", ac=[5]))]
    assert schedule_distance(out, net) - schedule_distance(old, net) == 0
    # frozen oracle value for the same instance
    exp = oracle_insert(old, [stop_tuple(stop("n1", bp=[0])), stop_tuple(stop("n2", ap=[0]))],
                        dict(old.customers), {0: p}, False, net, cfg)
    assert exp[0] == 4000.0


def test_moderate_parcel_after_passenger(net):
    cfg = SimConfig(detour_factor=2.0)
    # passenger aboard until n2; parcel stops may not precede the drop-off
    old = Schedule("n0", 0.0, (stop("n2", ac=[5]),), {5: c(5, "n0", "n2")}, onboard_customers={5: 0.0})
    p = ParcelRequest(0, "n0", "n1")
    out = insert_parcel(old, p, MOD, net, cfg)
    assert out is not None
    drop = next(i for i, x in enumerate(out.stops) if 5 in x.alight_customers)
    assert all(i >= drop for i, x in enumerate(out.stops) if x.board_parcels or x.alight_parcels)
    full = insert_parcel(old, p, FULL, net, cfg)
    assert schedule_distance(full, net) < schedule_distance(out, net)


def test_origin_insertion(net, cfg):
    out = insert_parcel_origin(Schedule("n0", 0.0), ParcelRequest(0, "n0", "n2"), FULL, net, cfg)
    assert [stop_tuple(x) for x in out.stops] == [stop_tuple(stop("n0", bp=[0]))]
    assert not out.dropoff_scheduled(0)
    cfg2 = SimConfig(cap_parcels=2)
    load = Schedule("n0", 0.0, (), {}, {1: ParcelRequest(1, "n0", "n3", 2)}, onboard_parcels=frozenset({1}))
    assert insert_parcel_origin(load, ParcelRequest(0, "n0", "n2"), FULL, net, cfg2) is None


def test_destination_insertion(net):
    cfg = SimConfig(detour_factor=1.0)
    p = ParcelRequest(0, "n0", "n2")
    picked = Schedule("n1", 0.0, (stop("n3", ac=[5]),), {5: c(5, "n1", "n3")}, {0: p},
                      onboard_customers={5: 0.0}, onboard_parcels=frozenset({0}))
    out = insert_parcel_destination(picked, p, FULL, net, cfg)
    assert [x.node for x in out.stops] == ["n2", "n3"]
    assert schedule_distance(out, net) == schedule_distance(picked, net)
    # pick-up still planned: the drop-off must follow it
    planned = Schedule("n3", 0.0, (stop("n0", bp=[0]),), {}, {0: p})
    out = insert_parcel_destination(planned, p, FULL, net, cfg)
    assert [x.node for x in out.stops] == ["n0", "n2"]
    with pytest.raises(ValueError):
        insert_parcel_destination(out, p, FULL, net, cfg)


def test_precedence_violation(net, cfg):
    s = Schedule("n0", 0.0, (stop("n3", ac=[0]), stop("n1", bc=[0])), {0: c(0, "n1", "n3")})
    assert is_feasible(s, FULL, net, cfg).violation == PRECEDENCE


def test_merge_with_existing_stop(net, cfg):
    old = Schedule("n0", 0.0, (stop("n1", bc=[5]), stop("n3", ac=[5])), {5: c(5, "n1", "n3")})
    out = insert_customer(old, c(6, "n1", "n3"), FULL, net, cfg)
    assert len(out.stops) == 2
    assert out.stops[0].board_customers == {5, 6}


@pytest.mark.parametrize("kind", ["customer", "parcel", "origin", "destination"])
def test_oracle_equivalence(kind):
    checked = 0
    for seed in range(1500):
        if checked == 150:
            break
        case = micro_case(seed, kind)
        if case is None:
            continue
        _, s, got, exp, net, cfg, mode = case
        checked += 1
        assert (got is None) == (exp is None), seed
        if got is not None:
            assert schedule_distance(got, net) == pytest.approx(exp[0], abs=1e-9)
            assert [stop_tuple(x) for x in got.stops] == exp[1], seed
    assert checked == 150


def test_budget_prefilter_is_exact():
    """Passing ``max_added`` only drops insertions that could not pass it."""
    for seed in range(300):
        case = micro_case(seed, "parcel")
        if case is None:
            continue
        _, s, got, _, net, cfg, mode = case
        p = next(iter(set(got.parcels.values()) - set(s.parcels.values()))) if got else None
        if p is None:
            continue
        added = schedule_distance(got, net) - schedule_distance(s, net)
        assert insert_parcel(s, p, mode, net, cfg, max_added=added + 1.0) == got
        res = insert_parcel(s, p, mode, net, cfg, max_added=added - 1.0)
        assert res is None if net.static_distance else res == got


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_insertion_properties(seed):
    case = micro_case(seed)
    if case is None:
        return
    kind, s, got, _, net, cfg, mode = case
    before = copy.deepcopy(s)
    if got is None:
        assert s == before
        return
    assert s == before
    assert is_feasible(got, mode, net, cfg)
    # every stop time follows from the previous departure
    t, node = got.start_time_s, got.start_node
    for x in got.stops:
        assert x.planned_arrival_s == pytest.approx(t + net.travel(node, x.node, t)[0])
        assert x.planned_departure_s == x.planned_arrival_s + cfg.boarding_time_s
        t, node = x.planned_departure_s, x.node
    if kind != "destination":
        assert objective(got, net, cfg) < objective(s, net, cfg)
