import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rppsim.config import SimConfig
from rppsim.kpi import SUMMARY_KEYS, KpiError, compute, read_report, write_report

CFG = SimConfig(fleet_size=1)

ONE_TRIP = [
    (0.0, "request", 0, "", "n0"),
    (0.0, "assign", 0, 0, "n0"),
    (0.0, "vehicle_busy", "", 0, "n3"),
    (120.0, "pickup", 0, 0, "n0"),
    (300.0, "dropoff", 0, 0, "n3"),
    (21600.0, "vehicle_idle", "", 0, "n3"),
]


def test_empty_log():
    r = compute([], CFG)
    assert list(r.summary) == list(SUMMARY_KEYS)
    assert all(r[k] == 0 for k in SUMMARY_KEYS if k != "km_per_served")
    assert r["km_per_served"] is None
    assert r.wait_hist == [] and r.travel_hist == []
    assert len(r.pudo_hist) == 24 and len(r.occupancy_ts) == 86400 // 900 + 1


def test_single_trip_arithmetic():
    r = compute(ONE_TRIP, CFG, fleet_km=3.0)
    assert r["mean_wait_s"] == 120.0 and r["mean_travel_s"] == 180.0
    assert r.wait_hist == [(0, 0), (60, 0), (120, 1)]
    assert r.travel_hist == [(0, 0), (60, 0), (120, 0), (180, 1)]
    assert r["utilization"] == 0.25  # 6 h of 24 h
    assert r["service_rate"] == 1.0 and r["km_per_served"] == 3.0
    assert r.pudo_hist[0] == (0, 1, 1, 0, 0)


def test_utilization_clipped_to_day():
    log = [(0.0, "vehicle_busy", "", 0, "a"), (90000.0, "vehicle_idle", "", 0, "a")]
    assert compute(log, CFG)["utilization"] == 1.0
    # still busy at the end of the log
    assert compute(log[:1], CFG.with_(fleet_size=2))["utilization"] == 0.5


def test_parcel_counts_by_size():
    log = [
        (0.0, "parcel_request", 7, "", "d"),
        (0.0, "parcel_request", 8, "", "d"),
        (0.0, "parcel_assign", 7, 0, "d"),
        (0.0, "vehicle_busy", "", 0, "d"),
        (60.0, "parcel_pickup", 7, 0, "d"),
        (901.0, "parcel_dropoff", 7, 0, "x"),
    ]
    r = compute(log, CFG, parcel_sizes={7: 3, 8: 2}, fleet_km=2.0, logistics_km=1.0)
    assert (r["parcel_requests"], r["parcel_items"]) == (2, 5)
    assert (r["parcel_requests_served"], r["parcel_items_served"]) == (1, 3)
    assert (r["parcel_requests_unserved"], r["parcel_items_unserved"]) == (1, 2)
    assert r["total_km"] == 3.0 and r["km_per_served"] == 3.0
    # one moving vehicle carrying one parcel at t = 900, empty again at 1800
    assert r.occupancy_ts[1][:3] == (900, 0, 1)
    assert r.occupancy_ts[2][:3] == (1800, 1, 0)


def test_occupancy_sample_sees_events_at_its_time():
    log = [(0.0, "vehicle_busy", "", 0, "a"), (900.0, "vehicle_idle", "", 0, "a")]
    assert [row[:2] for row in compute(log, CFG).occupancy_ts[:3]] == [(0, 1), (900, 0), (1800, 0)]


def test_truck_parcels_count_as_served():
    r = compute([], CFG, parcel_sizes={1: 2}, logistics_km=4.0, logistics_parcels=[1])
    assert r["parcel_requests_served"] == 1 and r["parcel_items_served"] == 2 and r["km_per_served"] == 4.0


@pytest.mark.parametrize("log", [
    [(0.0, "teleport", 0, 0, "a")],
    [(0.0, "request", 0, "", "a", "extra")],
    [(5.0, "request", 0, "", "a"), (1.0, "request", 1, "", "a")],
    [(0.0, "pickup", 0, 0, "a")],
    [(0.0, "request", 0, "", "a"), (0.0, "request", 0, "", "a")],
    [(0.0, "parcel_dropoff", 0, 0, "a")],
])
def test_malformed_logs_raise(log):
    with pytest.raises(KpiError):
        compute(log, CFG)


def test_report_round_trip(tmp_path):
    r = compute(ONE_TRIP, CFG, fleet_km=3.0)
    write_report(r, tmp_path / "a")
    write_report(compute(ONE_TRIP, CFG, fleet_km=3.0), tmp_path / "b")
    back = read_report(tmp_path / "a")
    assert back.summary == r.summary
    assert back.wait_hist == r.wait_hist and back.pudo_hist == r.pudo_hist
    assert back.occupancy_ts == r.occupancy_ts
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


@settings(max_examples=50, deadline=None)
@given(trips=st.lists(st.tuples(st.integers(0, 80000), st.integers(0, 600), st.integers(1, 3000)),
                      max_size=20))
def test_histograms_cover_every_trip(trips):
    log = []
    for cid, (t, wait, ride) in enumerate(trips):
        log += [(t, "request", cid, "", "a"), (t, "assign", cid, 0, "a"),
                (t + wait, "pickup", cid, 0, "a"), (t + wait + ride, "dropoff", cid, 0, "b")]
    log.sort(key=lambda e: e[0])
    r = compute(log, CFG)
    assert sum(c for _, c in r.wait_hist) == len(trips)
    assert sum(c for _, c in r.travel_hist) == len(trips)
    assert sum(row[1] for row in r.pudo_hist) == sum(1 for t, w, _ in trips if t + w < 86400)
    if trips:
        assert r["mean_wait_s"] == pytest.approx(sum(w for _, w, _ in trips) / len(trips))
