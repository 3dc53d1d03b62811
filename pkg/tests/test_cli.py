import csv
import subprocess
import sys

import pytest
import yaml

from rppsim.cli import DONE_MARKER, load_scenario, main


def gen(tmp_path, name="LINE4", *extra):
    d = tmp_path / name.lower()
    assert main(["gen-fixture", name, str(d), *extra]) == 0
    return d


def set_config(scenario, **changes):
    data = yaml.safe_load(scenario.read_text())
    data.update(changes)
    scenario.write_text(yaml.safe_dump(data))


def test_gen_fixture_line4(tmp_path):
    d = gen(tmp_path)
    for f in ("network/nodes.csv", "network/edges.csv", "network/zones.csv", "network/depots.csv",
              "od.csv", "parcels_raw.csv", "scenario.yaml"):
        assert (d / f).is_file(), f
    sc = load_scenario(d / "scenario.yaml")
    assert sc.output == d / "out"


def test_gen_fixture_grid_zones(tmp_path):
    d = gen(tmp_path, "GRID", "--k", "5")
    with (d / "network" / "zones.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 25 and len({r[next(k for k in r if k != "node")] for r in rows}) == 25


def test_run_writes_outputs(tmp_path):
    d = gen(tmp_path)
    set_config(d / "scenario.yaml", config={"fleet_size": 2, "end_time_s": 7200, "strategy": "SDPA"})
    assert main(["run", str(d / "scenario.yaml"), "--seed", "4"]) == 0
    out = d / "out"
    for f in ("events.csv", "audit.csv", "trace.csv", "rebalance.csv", "summary.csv", "wait_hist.csv",
              "travel_hist.csv", "pudo_hist.csv", "occupancy_ts.csv", "config.yaml", DONE_MARKER):
        assert (out / f).exists(), f
    assert yaml.safe_load((out / "config.yaml").read_text())["seed"] == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rppsim", "gen-fixture", "LINE4-TD", str(tmp_path / "x")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["sweep", "a.yaml", "--jobs", "zero"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_invalid_inputs(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    d = gen(tmp_path)
    sc = d / "scenario.yaml"
    set_config(sc, colour="blue")
    assert main(["run", str(sc)]) == 2
    data = yaml.safe_load(sc.read_text())
    del data["colour"]
    data["od"] = "nope.csv"
    sc.write_text(yaml.safe_dump(data))
    assert main(["run", str(sc)]) == 2
    data["od"] = "od.csv"
    data["config"] = {"threshold": 1.5}
    sc.write_text(yaml.safe_dump(data))
    assert main(["run", str(sc)]) == 2
    data["config"] = {"warp_speed": 9}
    sc.write_text(yaml.safe_dump(data))
    assert main(["run", str(sc)]) == 2
    assert main(["gen-fixture", "MOON", str(tmp_path / "m")]) == 2
    assert "invalid input" in capsys.readouterr().err


def test_sweep_cells_resume_and_index(tmp_path):
    d = gen(tmp_path)
    sc = d / "scenario.yaml"
    set_config(sc, config={"fleet_size": 2, "end_time_s": 3600},
               sweep={"threshold": [0.6, 0.8, 1.0], "strategy": ["CDPA", "SDPA", "SCPA"]})
    assert main(["sweep", str(sc)]) == 0
    out = d / "out"
    cells = sorted(p for p in out.iterdir() if p.is_dir())
    assert len(cells) == 9 and all((c / DONE_MARKER).exists() for c in cells)
    with (out / "index.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9 and {r["strategy"] for r in rows} == {"CDPA", "SDPA", "SCPA"}
    # completed cells are skipped on a rerun; a removed cell is recomputed
    stamp = {c.name: (c / "events.csv").stat().st_mtime_ns for c in cells}
    (cells[0] / DONE_MARKER).unlink()
    before = (cells[0] / "events.csv").read_bytes()
    assert main(["sweep", str(sc)]) == 0
    assert all((c / "events.csv").stat().st_mtime_ns == stamp[c.name] for c in cells[1:])
    assert (cells[0] / DONE_MARKER).exists()
    assert (cells[0] / "events.csv").read_bytes() == before


def test_empty_sweep_is_single_run(tmp_path):
    d = gen(tmp_path)
    set_config(d / "scenario.yaml", config={"fleet_size": 1, "end_time_s": 3600})
    assert main(["sweep", str(d / "scenario.yaml")]) == 0
    assert (d / "out" / "single" / DONE_MARKER).exists()
    assert (d / "out" / "index.csv").read_text().splitlines()[1].startswith("single,")


def test_sweep_parallel_matches_serial(tmp_path):
    d = gen(tmp_path)
    sc = d / "scenario.yaml"
    set_config(sc, config={"fleet_size": 2, "end_time_s": 3600}, sweep={"seed": [0, 1]})
    assert main(["sweep", str(sc), "--out", str(tmp_path / "serial")]) == 0
    assert main(["sweep", str(sc), "--out", str(tmp_path / "par"), "--jobs", "2"]) == 0
    for cell in ("seed=0", "seed=1"):
        for f in ("events.csv", "summary.csv"):
            assert (tmp_path / "serial" / cell / f).read_bytes() == (tmp_path / "par" / cell / f).read_bytes()
