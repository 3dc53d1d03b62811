import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_fastest, random_network
from rppsim.fixtures import grid, line4
from rppsim.network import (
    HOURS,
    Edge,
    Network,
    NetworkError,
    direct_metrics,
    fastest_path,
    load_network,
    load_network_dir,
    write_network,
)


def test_line4_shape(net):
    assert len(net.nodes) == 4
    assert len(net.edges) == 6
    assert net.depots == {"n0"}


def test_fastest_path_line(net):
    r = fastest_path(net, "n0", "n3", 0)
    assert r.node_sequence == ("n0", "n1", "n2", "n3")
    assert (r.travel_time_s, r.distance_m) == (180.0, 3000.0)


def test_fastest_path_identity(net):
    r = fastest_path(net, "n2", "n2", 5000)
    assert r.node_sequence == ("n2",)
    assert (r.travel_time_s, r.distance_m) == (0.0, 0.0)


def test_time_dependent_snapshot(net_td):
    assert fastest_path(net_td, "n0", "n3", 13 * 3600).travel_time_s == 360.0
    assert fastest_path(net_td, "n0", "n3", 11 * 3600 + 3599).travel_time_s == 180.0


def test_direct_metrics(net, net_td):
    assert direct_metrics(net, "n1", "n2", 0) == (60.0, 1000.0)
    assert direct_metrics(net, "n0", "n0", 0) == (0.0, 0.0)
    assert direct_metrics(net_td, "n0", "n1", 12.5 * 3600) == (120.0, 1000.0)


def test_unknown_node(net):
    with pytest.raises(KeyError):
        fastest_path(net, "n0", "n9", 0)


def _edges(tt=60.0):
    return [Edge("a", "b", 100.0, (tt,) * HOURS), Edge("b", "a", 100.0, (tt,) * HOURS)]


def test_validation_dangling_edge():
    with pytest.raises(NetworkError):
        Network(["a", "b"], _edges() + [Edge("a", "n9", 1.0, (1.0,) * HOURS)], {"a": "z", "b": "z"}, [])


def test_validation_zero_time():
    with pytest.raises(NetworkError):
        Network(["a", "b"], _edges(0.0), {"a": "z", "b": "z"}, [])


def test_validation_not_strongly_connected():
    with pytest.raises(NetworkError):
        Network(["a", "b"], _edges()[:1], {"a": "z", "b": "z"}, [])


def test_validation_zone_and_depot():
    with pytest.raises(NetworkError):
        Network(["a", "b"], _edges(), {"a": "z"}, [])
    with pytest.raises(NetworkError):
        Network(["a", "b"], _edges(), {"a": "z", "b": "z"}, ["c"])


def test_roundtrip_files(tmp_path, net_td):
    write_network(net_td, tmp_path)
    back = load_network_dir(tmp_path)
    assert back.nodes == net_td.nodes
    assert back.edges == net_td.edges
    assert back.zones == net_td.zones and back.depots == net_td.depots


def test_load_rejects_malformed(tmp_path, net):
    paths = write_network(net, tmp_path)
    text = paths["edges"].read_text().splitlines()
    paths["edges"].write_text("\n".join(text[:2] + ["n0,n1,abc" + ",60" * 24]) + "\n")
    with pytest.raises(NetworkError):
        load_network(paths["nodes"], paths["edges"], paths["zones"], paths["depots"])


def test_lexicographic_tie_break():
    # two equal-time paths a->b->d and a->c->d; b < c
    tt = (10.0,) * HOURS
    edges = [Edge("a", "c", 5.0, tt), Edge("a", "b", 7.0, tt), Edge("b", "d", 7.0, tt), Edge("c", "d", 5.0, tt),
             Edge("d", "a", 1.0, tt)]
    net = Network(["a", "b", "c", "d"], edges, {n: "z" for n in "abcd"}, [])
    r = fastest_path(net, "a", "d", 0)
    assert r.node_sequence == ("a", "b", "d")
    assert r.distance_m == 14.0


def test_matches_path_enumeration_oracle():
    for seed in range(60):
        rng = np.random.default_rng(seed)
        net = random_network(rng, int(rng.integers(2, 9)), integer_times=bool(seed % 2))
        for a in net.nodes:
            for b in net.nodes:
                if a == b:
                    continue
                for t in (0.0, 8 * 3600.0):
                    tt, dd, seq = oracle_fastest(net, a, b, t)
                    r = fastest_path(net, a, b, t)
                    assert r.node_sequence == tuple(seq)
                    assert r.travel_time_s == pytest.approx(tt, rel=1e-12)
                    assert r.distance_m == dd
                    assert net.travel(a, b, t) == pytest.approx((tt, dd), rel=1e-12)


def test_min_travel_time_is_lower_bound():
    rng = np.random.default_rng(3)
    net = random_network(rng, 7)
    for a in net.nodes:
        for b in net.nodes:
            lb = net.min_travel_time(a, b)
            assert all(lb <= net.travel(a, b, h * 3600)[0] + 1e-9 for h in range(HOURS))


def test_static_distance_flag():
    assert grid(4).static_distance
    assert line4(True).static_distance


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), hour=st.integers(0, 23))
def test_triangle_inequality_and_distance_sum(seed, hour):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 6, integer_times=False)
    t = hour * 3600.0
    nodes = net.nodes
    for a in nodes:
        for b in nodes:
            r = fastest_path(net, a, b, t)
            assert r.distance_m == sum(net.edges[(u, v)].length_m for u, v in zip(r.node_sequence, r.node_sequence[1:]))
            for c in nodes:
                assert net.travel(a, c, t)[0] <= net.travel(a, b, t)[0] + net.travel(b, c, t)[0] + 1e-9


def test_deterministic_routes():
    r1 = fastest_path(grid(6), "g00_00", "g05_05", 0)
    r2 = fastest_path(grid(6), "g00_00", "g05_05", 0)
    assert r1 == r2
