"""Scenario sweeps: grid cells x maps x seeded iterations, aggregated over valid paths."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .geometry import HighCostRegion, MapWorld, generate_map
from .mpc import PriorConfig, read_trip_dir, run_episode, write_trip_csv
from .network import (ALWAYS, DELTA_SETTINGS, Availability, EdgeNetwork, EdgeNode,
                      deploy_servers, mm1_delay_trace)
from .planner import PlanningError, ReferencePath, plan_reference
from .priors import PriorStore
from .vehicle import generate_library

CONFIG_FORMAT_VERSION = 1
SCENARIOS = ("capacity", "latency", "density", "availability", "sensing", "histories",
             "multi_agent", "random_maps")

CAPACITY_GRID = (0, 10, 20, 40, 80, 100)
DELTA_GRID = (0, 1, 2, 3, 4)
DENSITY_GRID = (0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
AVAILABILITY_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
QUEUE_GRID = ((10, 100), (20, 200), (10, 200), (50, 300), (20, 300), (80, 400), (50, 400),
              (100, 500), (80, 100))
HISTORY_GRID = (180, 540, 900, 1260, 1800, 2340, 2700, 3060, 3600)
BETA_GRID = (0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)
SERVER_COUNT_GRID = (5, 10, 15, 20, 25, 30, 35, 40, 45)
SENSING_KINDS = ("icy", "mud")
# the 18 per-map options of the random-maps sweep
RANDOM_MAP_OPTIONS = (
    *({"c": c} for c in CAPACITY_GRID),
    *({"delta": d} for d in (1, 2, 3, 4)),
    *({"N": n} for n in (10, 20, 30, 40)),
    *({"p": p} for p in (0.2, 0.4, 0.6, 0.8)),
)

AGENT_CAPACITY = 10
DEFAULT_SERVERS = 20
DEFAULT_DELTA = 1
DEFAULT_ITERATIONS = 50
REGION_HALF_EXTENT = 0.04
REGION_COST_RATE = 5.0
REGION_MULTIPLIER = {"icy": 1.5, "mud": 0.5}

RESULT_COLUMNS = ("scenario", "cell", "map_seed", "iterations", "n_valid", "mean_cost",
                  "validity_rate", "pof", "blind_spot_rate")


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass
class ScenarioConfig:
    """One sweep: which scenario, on which maps, over which grid slice."""

    scenario: str
    map_seeds: tuple = (160,)
    grid: dict = field(default_factory=dict)
    iterations: int = DEFAULT_ITERATIONS
    base_seed: int = 0
    agent_capacity: int = AGENT_CAPACITY
    step_cap: int = 1000
    map_dir: str | None = None
    prior_source_iterations: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        self.map_seeds = tuple(int(s) for s in self.map_seeds)
        self.grid = {k: tuple(tuple(v) if isinstance(v, list) else v for v in vals)
                     for k, vals in dict(self.grid).items()}
        _check_grid(self.grid)

    def to_dict(self):
        doc = asdict(self)
        doc["version"] = CONFIG_FORMAT_VERSION
        doc["map_seeds"] = list(self.map_seeds)
        doc["grid"] = {k: [list(v) if isinstance(v, tuple) else v for v in vals]
                       for k, vals in self.grid.items()}
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        version = doc.pop("version", CONFIG_FORMAT_VERSION)
        if version != CONFIG_FORMAT_VERSION:
            raise ValueError(f"unsupported config format version {version!r}")
        return cls(**doc)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


_ALLOWED = {
    "c": set(CAPACITY_GRID), "delta": set(DELTA_GRID), "N": set(DENSITY_GRID),
    "p": set(AVAILABILITY_GRID), "lam_mu": set(QUEUE_GRID), "omega": set(HISTORY_GRID),
    "beta": set(BETA_GRID), "kind": set(SENSING_KINDS), "mode": {"mpc", "empc"},
}


def _check_grid(grid):
    for key, values in grid.items():
        if key not in _ALLOWED:
            raise ValueError(f"unknown grid axis {key!r}")
        bad = [v for v in values if v not in _ALLOWED[key]]
        if bad:
            raise ValueError(f"grid values {bad} not allowed for axis {key!r}")


def default_grid(scenario):
    return {
        "capacity": {"c": CAPACITY_GRID},
        "latency": {"delta": DELTA_GRID},
        "density": {"N": DENSITY_GRID},
        "availability": {"p": AVAILABILITY_GRID},
        "sensing": {"kind": SENSING_KINDS, "mode": ("mpc", "empc")},
        "histories": {"beta": BETA_GRID, "omega": HISTORY_GRID},
        "multi_agent": {"lam_mu": QUEUE_GRID, "N": SERVER_COUNT_GRID},
        "random_maps": {},
    }[scenario]


def scenario_cells(cfg):
    """Cells of the sweep as ordered dicts of axis values."""
    if cfg.scenario == "random_maps":
        return [dict(opt) for opt in RANDOM_MAP_OPTIONS]
    grid = {**default_grid(cfg.scenario), **cfg.grid}
    axes = list(grid)
    return [dict(zip(axes, combo)) for combo in itertools.product(*(grid[a] for a in axes))]


def cell_label(cell):
    def fmt(v):
        return "/".join(map(str, v)) if isinstance(v, tuple) else str(v)
    return ";".join(f"{k}={fmt(v)}" for k, v in cell.items())


def child_seed(base_seed, map_seed, iteration, *extra):
    """Episode seed. It depends on the map and iteration but not on the cell, so every
    cell of a sweep sees the same agent draws (paired comparisons across the grid)."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(map_seed), int(iteration), *extra))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class EpisodeRow:
    cell: str
    map_seed: int
    iteration: int
    seed: int
    total_cost: float
    valid: bool
    steps: int
    blind_spot_events: int


@dataclass
class ResultsTable:
    scenario: str
    rows: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    rejected_maps: list = field(default_factory=list)
    edge_log: list = field(default_factory=list)

    def row(self, cell, map_seed=None):
        label = cell if isinstance(cell, str) else cell_label(cell)
        for r in self.rows:
            if r["cell"] == label and (map_seed is None or r["map_seed"] == map_seed):
                return r
        raise KeyError(label)

    def costs(self, cell, map_seed=None):
        """Per-iteration (map, iteration) -> cost for valid episodes of a cell."""
        label = cell if isinstance(cell, str) else cell_label(cell)
        return {(e.map_seed, e.iteration): e.total_cost for e in self.episodes
                if e.cell == label and e.valid and (map_seed is None or e.map_seed == map_seed)}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path} holds no result rows")
        casts = {"map_seed": int, "iterations": int, "n_valid": int, "mean_cost": float,
                 "validity_rate": float, "pof": float, "blind_spot_rate": float}
        parsed = [{k: casts.get(k, str)(v) for k, v in r.items()} for r in rows]
        return cls(parsed[0]["scenario"], parsed)

    def write_episodes_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("cell", "map_seed", "iteration", "seed", "total_cost", "valid",
                             "steps", "blind_spot_events"))
            for e in self.episodes:
                writer.writerow((e.cell, e.map_seed, e.iteration, e.seed, repr(e.total_cost),
                                 int(e.valid), e.steps, e.blind_spot_events))


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def summarize(scenario, cell, map_seed, results):
    n = len(results)
    valid = [r for r in results if r.valid]
    steps = sum(r.steps for r in results)
    return {
        "scenario": scenario,
        "cell": cell,
        "map_seed": map_seed,
        "iterations": n,
        "n_valid": len(valid),
        "mean_cost": float(np.mean([r.total_cost for r in valid])) if valid else math.nan,
        "validity_rate": len(valid) / n if n else math.nan,
        "pof": 1.0 - len(valid) / n if n else math.nan,
        "blind_spot_rate": sum(r.blind_spot_events for r in results) / steps if steps else 0.0,
    }


def cost_reduction(baseline, treated):
    """Percentage drop of the treated mean relative to the baseline mean."""
    b = baseline["mean_cost"] if isinstance(baseline, dict) else float(baseline)
    t = treated["mean_cost"] if isinstance(treated, dict) else float(treated)
    if b == 0 or math.isnan(b):
        raise ZeroDivisionError("baseline mean is zero or undefined; ratio is undefined")
    return 100.0 * (b - t) / b


@dataclass(frozen=True)
class SignTest:
    n_better: int
    n_worse: int
    n_pairs: int
    p_value: float


def sign_test(baseline, treated, alternative="greater"):
    """One-sided sign test that ``treated`` is cheaper than ``baseline`` on paired keys.

    ``alternative="less"`` tests the reverse (treated more expensive).
    """
    keys = sorted(set(baseline) & set(treated))
    diffs = np.array([baseline[k] - treated[k] for k in keys])
    better = int((diffs > 0).sum())
    worse = int((diffs < 0).sum())
    n = better + worse
    if n == 0:
        return SignTest(0, 0, len(keys), 1.0)
    k = better if alternative == "greater" else worse
    return SignTest(better, worse, len(keys), float(binomtest(k, n, 0.5, "greater").pvalue))


# -- artifacts -------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _generated_map(seed):
    return generate_map(seed)


@lru_cache(maxsize=64)
def _planned_path(world):
    return plan_reference(world)


@lru_cache(maxsize=4)
def _library(speed_profile="normal"):
    return generate_library(speed_profile=speed_profile)


def load_map(seed, map_dir=None):
    if map_dir is None:
        return _generated_map(seed)
    path = Path(map_dir) / f"map_{seed}.json"
    if not path.exists():
        raise MissingArtifactError(
            f"{path} not found; create it with `edgempc gen-map --seed {seed}`")
    return MapWorld.load(path)


def reference_for(world, map_dir=None):
    if map_dir is not None:
        path = Path(map_dir) / f"path_{world.seed}.json"
        if path.exists():
            return ReferencePath.load(path)
    return _planned_path(world)


def sensing_regions(path, kind):
    """Two hidden regions of one kind centred at 1/3 and 2/3 of the reference path."""
    mult = REGION_MULTIPLIER[kind]
    regions = []
    for frac in (1 / 3, 2 / 3):
        cx, cy = (np.clip(path.point_at(frac * path.length), REGION_HALF_EXTENT,
                          1 - REGION_HALF_EXTENT))
        regions.append(HighCostRegion((float(cx), float(cy)),
                                      (REGION_HALF_EXTENT, REGION_HALF_EXTENT), kind, mult,
                                      REGION_COST_RATE, hidden=True))
    return regions


# -- per-cell episode setup -------------------------------------------------------------

def _single_node(world, capacity, availability=ALWAYS):
    ideal = DELTA_SETTINGS[0]
    node = EdgeNode(0, (0.5, 0.5), int(capacity), ideal.coverage_radius, ideal.profile,
                    availability, ideal.requires_los)
    return EdgeNetwork(world, (node,))


def _deployed(world, n, seed, delta=DEFAULT_DELTA, availability=ALWAYS):
    if n == 0:
        return None
    return EdgeNetwork(world, deploy_servers(world, n, seed=seed, delta=delta,
                                             availability=availability))


def _queue_network(world, n, seed, lam, mu):
    nodes = deploy_servers(world, n, seed=seed, delta=DEFAULT_DELTA)
    out = []
    for nd in nodes:
        trace = mm1_delay_trace(lam, mu, seed=np.random.SeedSequence(seed, spawn_key=(11, nd.node_id)))
        out.append(EdgeNode(nd.node_id, nd.position, nd.capacity, nd.coverage_radius,
                            nd.link_profile, Availability("delay_trace", trace=tuple(trace)),
                            nd.requires_los))
    return EdgeNetwork(world, tuple(out))


def network_for(cfg, cell, world, seed, agent_capacity):
    """The edge network (or None) a cell runs against."""
    scenario = cfg.scenario
    if scenario == "random_maps":
        if "c" in cell:
            return _single_node(world, cell["c"]) if cell["c"] else None
        if "delta" in cell:
            return _deployed(world, DEFAULT_SERVERS, seed, delta=cell["delta"])
        if "N" in cell:
            return _deployed(world, cell["N"], seed)
        return _deployed(world, DEFAULT_SERVERS, seed,
                         availability=Availability("bernoulli", p=cell["p"]))
    if scenario == "capacity":
        return _single_node(world, cell["c"]) if cell["c"] else None
    if scenario == "latency":
        return _deployed(world, DEFAULT_SERVERS, seed, delta=cell["delta"])
    if scenario == "density":
        return _deployed(world, cell["N"], seed)
    if scenario == "availability":
        return _deployed(world, DEFAULT_SERVERS, seed,
                         availability=Availability("bernoulli", p=cell["p"]))
    if scenario == "sensing":
        return _single_node(world, agent_capacity) if cell["mode"] == "empc" else None
    if scenario == "histories":
        return _single_node(world, agent_capacity)
    if scenario == "multi_agent":
        lam, mu = cell["lam_mu"]
        return _queue_network(world, cell["N"], seed, lam, mu)
    raise ValueError(scenario)


def collect_prior_trips(world, path, library, n_trips, base_seed, map_seed,
                        agent_capacity=AGENT_CAPACITY, step_cap=1000):
    """Prior driving data: episodes cycling through the capacity grid, one ideal node each."""
    trips = []
    for i in range(n_trips):
        c = CAPACITY_GRID[i % len(CAPACITY_GRID)]
        network = _single_node(world, c) if c else None
        seed = child_seed(base_seed, map_seed, i, 1)
        trips.append(run_episode(world, path, library, agent_capacity, network,
                                 step_cap=step_cap, seed=seed))
    return trips


def run_scenario(cfg, trips_dir=None, prior_trips=None, progress=None):
    """Run every cell x map x iteration of ``cfg`` and aggregate per (cell, map).

    Maps without an RRT* path are skipped and listed in ``rejected_maps``.
    ``prior_trips`` (histories only) maps a map seed to pre-collected trips.
    """
    table = ResultsTable(cfg.scenario)
    cells = scenario_cells(cfg)
    for map_seed in cfg.map_seeds:
        base_world = load_map(map_seed, cfg.map_dir)
        try:
            path = reference_for(base_world, cfg.map_dir)
        except PlanningError:
            table.rejected_maps.append(map_seed)
            continue
        library = _library()
        stores = {}
        if cfg.scenario == "histories":
            omegas = sorted({c["omega"] for c in cells})
            trips = (prior_trips or {}).get(map_seed)
            if trips is None:
                n_src = cfg.prior_source_iterations or max(omegas)
                trips = collect_prior_trips(base_world, path, library, n_src, cfg.base_seed,
                                            map_seed, cfg.agent_capacity, cfg.step_cap)
            for om in omegas:
                stores[om] = PriorStore(n_primitives=len(library)).fit(trips[:om])
        for cell in cells:
            world = base_world
            if cfg.scenario == "sensing":
                world = base_world.with_regions(sensing_regions(path, cell["kind"]))
            label = cell_label(cell)
            results = []
            for it in range(cfg.iterations):
                seed = child_seed(cfg.base_seed, map_seed, it)
                network = network_for(cfg, cell, world, seed, cfg.agent_capacity)
                prior = PriorConfig(stores[cell["omega"]], cell["beta"]) \
                    if cfg.scenario == "histories" else None
                res = run_episode(world, path, library, cfg.agent_capacity, network, prior,
                                  step_cap=cfg.step_cap, seed=seed)
                results.append(res)
                table.episodes.append(EpisodeRow(label, map_seed, it, seed, res.total_cost,
                                                 res.valid, res.steps, res.blind_spot_events))
                table.edge_log.extend(res.edge_log)
                if trips_dir is not None and res.valid:
                    out = Path(trips_dir)
                    out.mkdir(parents=True, exist_ok=True)
                    write_trip_csv(res, out / f"{cfg.scenario}_{map_seed}_{_slug(label)}_{it:04d}.csv")
                if progress is not None:
                    progress(cfg.scenario, label, map_seed, it)
            table.rows.append(summarize(cfg.scenario, label, map_seed, results))
    return table


def _slug(label):
    return label.replace(";", "_").replace("=", "").replace("/", "-")


def load_prior_trips(directory):
    return read_trip_dir(directory)
