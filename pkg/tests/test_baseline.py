import numpy as np
import pytest

from oracles import oracle_tours_km, random_parcel_instance
from rppsim.baseline import _fits, route_distance, route_logistics, write_routes
from rppsim.demand import DemandError, ParcelRequest


def test_line4_single_route(net):
    parcels = [ParcelRequest(0, "n0", "n2"), ParcelRequest(1, "n0", "n3")]
    routes, km = route_logistics(parcels, net, 100)
    assert len(routes) == 1
    # both positions add 2 km; the earliest one is kept
    assert routes[0].nodes() == ["n0", "n3", "n2", "n0"]
    assert km == pytest.approx(6.0)


def test_no_parcels(net):
    assert route_logistics([], net, 100) == ([], 0.0)


def test_capacity_forces_second_route(net):
    parcels = [ParcelRequest(i, "n0", "n3") for i in range(101)]
    routes, km = route_logistics(parcels, net, 100)
    assert len(routes) >= 2
    for r in routes:
        assert max(r.load_profile()) <= 100
    assert sum(len(r.stops) for r in routes) == 101


def test_pickups_collected_on_the_way(net):
    # one delivery and one collection fit a size-1 truck on a single tour
    parcels = [ParcelRequest(0, "n0", "n2"), ParcelRequest(1, "n3", "n0")]
    routes, km = route_logistics(parcels, net, 1)
    assert len(routes) == 1 and routes[0].load_profile() == [1, 0, 1]
    # the reverse order would carry both at once
    assert not _fits([(n, p) for n, p in reversed(routes[0].stops)], "n0", 1)


def test_parcel_without_depot_rejected(net):
    with pytest.raises(DemandError):
        route_logistics([ParcelRequest(0, "n1", "n2")], net, 100)
    with pytest.raises(DemandError):
        route_logistics([ParcelRequest(0, "n0", "n1", size=5)], net, 4)


def test_heuristic_never_beats_exhaustive_optimum():
    for seed in range(100):
        net, parcels, cap = random_parcel_instance(np.random.default_rng(seed))
        routes, km = route_logistics(parcels, net, cap)
        assert km >= oracle_tours_km(parcels, net, cap) - 1e-9
        served = sorted(p.id for r in routes for _, p in r.stops)
        assert served == sorted(p.id for p in parcels)
        for r in routes:
            nodes = r.nodes()
            assert nodes[0] == nodes[-1] == r.depot
            assert max(r.load_profile()) <= cap and min(r.load_profile()) >= 0
            assert r.distance_m == pytest.approx(route_distance(nodes, net))


def test_route_dump(tmp_path, net):
    routes, _ = route_logistics([ParcelRequest(0, "n0", "n2"), ParcelRequest(1, "n3", "n0")], net, 100)
    write_routes(routes, tmp_path / "routes.csv")
    assert (tmp_path / "routes.csv").read_text().splitlines() == [
        "depot,route_index,seq,node,parcel_id",
        "n0,0,0,n0,",
        "n0,0,1,n3,1",
        "n0,0,2,n2,0",
        "n0,0,3,n0,",
    ]
