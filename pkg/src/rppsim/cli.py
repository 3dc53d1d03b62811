"""Command line: single runs, parameter sweeps and fixture generation.

A scenario is a YAML mapping::

    network: net/            # directory with nodes/edges/zones/depots.csv
    od: od.csv               # hourly zone OD matrices
    parcels_raw: parcels_raw.csv
    customers: customers.csv # optional, replaces sampling from the OD matrix
    parcels: parcels.csv     # optional, replaces aggregation of parcels_raw
    output: out/
    config:                  # any SimConfig field
      strategy: SDPA
      threshold: 0.8
    sweep:                   # optional, Cartesian product of SimConfig fields
      threshold: [0.6, 0.8, 1.0]
      seed: [0, 1, 2]

Relative paths are resolved against the scenario file's directory.
Exit codes: 0 success, 1 usage, 2 invalid input, 3 failure during a run.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .config import ConfigError, SimConfig
from .demand import DemandError, build_parcels, read_customers, read_od, read_parcels, read_raw_parcels, \
    sample_customers
from .network import NetworkError, load_network_dir

LOG = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3

SCENARIO_KEYS = {"network", "od", "parcels_raw", "customers", "parcels", "output", "config", "sweep"}
PATH_KEYS = ("network", "od", "parcels_raw", "customers", "parcels")
DONE_MARKER = "DONE"
INDEX_KPIS = ("customers_served", "service_rate", "parcel_requests_served", "parcel_items_served",
              "fleet_km", "logistics_km", "utilization", "km_per_served")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    path: Path
    paths: dict
    output: Path
    config: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file {path} not found")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected a mapping at top level")
    unknown = set(data) - SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"{path}: unknown keys {sorted(unknown)}")
    base = path.parent
    paths = {}
    for key in PATH_KEYS:
        if data.get(key) is None:
            continue
        p = Path(data[key])
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ScenarioError(f"{path}: {key} path {p} does not exist")
        paths[key] = p
    for key in ("network", "od"):
        if key not in paths:
            raise ScenarioError(f"{path}: '{key}' is required")
    if "parcels_raw" in paths and "parcels" in paths:
        raise ScenarioError(f"{path}: give either parcels_raw or parcels, not both")
    config = data.get("config") or {}
    sweep = data.get("sweep") or {}
    if not isinstance(config, dict) or not isinstance(sweep, dict):
        raise ScenarioError(f"{path}: config and sweep must be mappings")
    SimConfig.from_mapping(config)  # validate early
    names = set(SimConfig.field_names())
    for k, v in sweep.items():
        if k not in names:
            raise ScenarioError(f"{path}: unknown sweep key {k!r}")
        if not isinstance(v, list) or not v:
            raise ScenarioError(f"{path}: sweep.{k} must be a non-empty list")
    out = Path(data.get("output") or "out")
    out = out if out.is_absolute() else base / out
    return Scenario(path, paths, out, dict(config), dict(sweep))


def prepare(sc: Scenario, cfg: SimConfig):
    """Load network and demand for one run."""
    net = load_network_dir(sc.paths["network"])
    od = read_od(sc.paths["od"])
    if "customers" in sc.paths:
        customers = read_customers(sc.paths["customers"])
    else:
        customers = sample_customers(od, net, cfg.penetration, cfg.seed)
    if "parcels" in sc.paths:
        parcels = read_parcels(sc.paths["parcels"])
    elif "parcels_raw" in sc.paths:
        parcels = build_parcels(read_raw_parcels(sc.paths["parcels_raw"]), cfg.parcel_share, cfg.cap_parcels,
                                cfg.seed)
    else:
        parcels = []
    return net, od, customers, parcels


def _run_cell(sc: Scenario, cfg: SimConfig, out: Path):
    from .demand import write_customers, write_parcels
    from .engine import run, write_outputs

    net, od, customers, parcels = prepare(sc, cfg)
    res = run(cfg, net, customers, parcels, od)
    out.mkdir(parents=True, exist_ok=True)
    write_outputs(res, out)
    write_customers(customers, out / "customers.csv")
    write_parcels(parcels, out / "parcels.csv")
    (out / "config.yaml").write_text(yaml.safe_dump(_cfg_dict(cfg), sort_keys=True), encoding="utf-8")
    (out / DONE_MARKER).write_text("", encoding="utf-8")
    return res.report.summary


def _cfg_dict(cfg: SimConfig) -> dict:
    out = {}
    for k in SimConfig.field_names():
        v = getattr(cfg, k)
        out[k] = v.value if hasattr(v, "value") else v
    return out


def run_scenario(path, out=None, seed=None) -> int:
    sc = load_scenario(path)
    conf = dict(sc.config)
    if seed is not None:
        conf["seed"] = seed
    cfg = SimConfig.from_mapping(conf)
    summary = _run_cell(sc, cfg, Path(out) if out else sc.output)
    LOG.info("served %s customers, %s parcel requests", summary["customers_served"],
             summary["parcel_requests_served"])
    return EXIT_OK


def cells(sc: Scenario, seed=None):
    """Yield (name, SimConfig) for every cell of the sweep."""
    sweep = dict(sc.sweep)
    if seed is not None:
        sweep["seed"] = [seed]
    keys = list(sweep)
    for values in itertools.product(*(sweep[k] for k in keys)):
        conf = dict(sc.config)
        conf.update(zip(keys, values))
        name = "_".join(f"{k}={v}" for k, v in zip(keys, values)) or "single"
        yield name, SimConfig.from_mapping(conf), dict(zip(keys, values))


def _cell_job(args):
    sc, name, cfg, out = args
    _run_cell(sc, cfg, out)
    return name


def run_sweep(path, out=None, seed=None, jobs: int = 1) -> int:
    sc = load_scenario(path)
    root = Path(out) if out else sc.output
    root.mkdir(parents=True, exist_ok=True)
    todo, all_cells = [], []
    for name, cfg, params in cells(sc, seed):
        cell_dir = root / name
        all_cells.append((name, params, cell_dir))
        if (cell_dir / DONE_MARKER).exists():
            LOG.info("skipping completed cell %s", name)
            continue
        todo.append((sc, name, cfg, cell_dir))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for name in pool.map(_cell_job, todo):
                LOG.info("finished cell %s", name)
    else:
        for job in todo:
            LOG.info("finished cell %s", _cell_job(job))
    write_index(root, all_cells, list(sc.sweep) + (["seed"] if seed is not None and "seed" not in sc.sweep else []))
    return EXIT_OK


def write_index(root: Path, all_cells, keys):
    from .kpi import read_report

    with (root / "index.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["cell"] + list(keys) + list(INDEX_KPIS)) + "\n")
        for name, params, cell_dir in all_cells:
            summary = read_report(cell_dir).summary
            vals = [str(params.get(k, "")) for k in keys]
            kpis = ["" if summary.get(k) is None else str(summary[k]) for k in INDEX_KPIS]
            fh.write(",".join([name] + vals + kpis) + "\n")


def gen_fixture(name: str, out_dir, k: int = 10, daily_trips=None, raw_parcels=None, seed: int = 0) -> int:
    from .fixtures import generate

    out = Path(out_dir)
    paths = generate(name, out, k=k, daily_trips=daily_trips, n_raw_parcels=raw_parcels, seed=seed)
    for p in ("nodes", "edges", "zones", "depots"):
        target = out / "network" / paths[p].name
        target.parent.mkdir(parents=True, exist_ok=True)
        paths[p].replace(target)
    scenario = {
        "network": "network",
        "od": "od.csv",
        "parcels_raw": "parcels_raw.csv",
        "output": "out",
        "config": {"fleet_size": 20 if name.upper() == "GRID" else 2,
                   "penetration": 0.05 if name.upper() == "GRID" else 1.0},
    }
    (out / "scenario.yaml").write_text(yaml.safe_dump(scenario, sort_keys=False), encoding="utf-8")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rppsim", description="Ride-parcel-pooling fleet simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in ("run", "sweep"):
        s = sub.add_parser(cmd, help=f"{cmd} a scenario file")
        s.add_argument("scenario")
        s.add_argument("--seed", type=int, default=None, help="override the seed")
        s.add_argument("--out", default=None, help="override the output directory")
        if cmd == "sweep":
            s.add_argument("--jobs", type=int, default=1, help="parallel cells")
    g = sub.add_parser("gen-fixture", help="write a synthetic network and demand")
    g.add_argument("name", help="LINE4, LINE4-TD or GRID")
    g.add_argument("dir")
    g.add_argument("--k", type=int, default=10, help="GRID side length")
    g.add_argument("--daily-trips", type=float, default=None)
    g.add_argument("--raw-parcels", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return run_scenario(args.scenario, args.out, args.seed)
        if args.command == "sweep":
            if args.jobs < 1:
                parser.error("--jobs must be >= 1")
            return run_sweep(args.scenario, args.out, args.seed, args.jobs)
        return gen_fixture(args.name, args.dir, args.k, args.daily_trips, args.raw_parcels, args.seed)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ScenarioError, ConfigError, DemandError, NetworkError, FileNotFoundError) as exc:
        print(f"rppsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # unknown fixture names and similar argument problems
        print(f"rppsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - the exit code is the contract
        LOG.debug("run failed", exc_info=True)
        print(f"rppsim: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
