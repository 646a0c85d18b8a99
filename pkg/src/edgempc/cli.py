"""Command-line entry point: map/library/path artifacts, sweeps, oracles and reports.

Outputs go under ``$EDGEMPC_OUT`` (default ``./edgempc_out``).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .geometry import MapGenerationError, MapWorld, generate_map
from .mpc import read_trip_csv
from .network import PROFILE_A, mm1_sojourn_times, sample_links
from .oracles import (CorridorCost, CostRange, QueueParams, UniformCost, expected_min_corridor,
                      expected_min_uniform, mg1_metrics, mm1_metrics, monte_carlo_min)
from .planner import PlanningError, ReferencePath, plan_reference
from .report import REPORT_KINDS, ReportDimensionError, emit_report
from .vehicle import LibraryGenerationError, generate_library

OUT_ENV = "EDGEMPC_OUT"
EXIT_INCOMPLETE = 2


def out_dir():
    path = Path(os.environ.get(OUT_ENV, "edgempc_out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


# names used in a saved library's params block
_LIBRARY_ALIASES = {"K": "n_primitives", "H": "horizon"}


def _parse_params(text):
    """A JSON file, a JSON object, or ``key=value`` pairs separated by commas."""
    if not text:
        return {}
    if Path(text).is_file():
        return json.loads(Path(text).read_text())
    if text.lstrip().startswith("{"):
        return json.loads(text)
    params = {}
    for item in text.split(","):
        key, _, value = item.partition("=")
        try:
            params[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            params[key.strip()] = value.strip()
    return params


@click.group()
def main():
    """Edge-assisted sampling MPC simulator."""


@main.command("gen-map")
@click.option("--seed", type=int, required=True)
@click.option("--obstacles", type=int, default=50, show_default=True)
def gen_map(seed, obstacles):
    """Generate a map and write maps/map_<seed>.json."""
    try:
        world = generate_map(seed, obstacles)
    except MapGenerationError as exc:
        raise click.ClickException(str(exc)) from exc
    target = out_dir() / "maps"
    target.mkdir(exist_ok=True)
    world.save(target / f"map_{seed}.json")
    click.echo(target / f"map_{seed}.json")


@main.command("gen-library")
@click.option("--params", default="", help="JSON file, JSON object or key=value list.")
@click.option("--name", default="library.json", show_default=True)
def gen_library(params, name):
    """Generate a motion-primitive library."""
    try:
        kwargs = {_LIBRARY_ALIASES.get(k, k): v for k, v in _parse_params(params).items()}
        lib = generate_library(**kwargs)
    except (LibraryGenerationError, TypeError) as exc:
        raise click.ClickException(str(exc)) from exc
    lib.save(out_dir() / name)
    click.echo(out_dir() / name)


@main.command()
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Planner seed.")
def plan(map_path, seed):
    """Plan the RRT* reference path; writes path_<map seed>.json beside the map."""
    world = MapWorld.load(map_path)
    try:
        path = plan_reference(world, seed=seed)
    except PlanningError as exc:
        click.echo(f"rejected map seed {world.seed}: {exc}", err=True)
        sys.exit(EXIT_INCOMPLETE)
    target = Path(map_path).with_name(f"path_{world.seed}.json")
    path.save(target)
    click.echo(f"{target} length={path.length:.4f} waypoints={len(path.waypoints)}")


def _finish(table, cfg, out):
    table.write_csv(out / "results.csv")
    table.write_episodes_csv(out / "episodes.csv")
    cells = harness.scenario_cells(cfg)
    kind = "heatmap" if cells and len(cells[0]) == 2 else "bars"
    if table.rows:
        emit_report(table, kind, out)
        if kind == "heatmap":
            emit_report(table, kind, out, metric="pof")
    expected = len(cells) * len(cfg.map_seeds)
    click.echo(f"{len(table.rows)}/{expected} cells complete -> {out / 'results.csv'}")
    if table.rejected_maps:
        click.echo(f"rejected map seeds (no reference path): {table.rejected_maps}", err=True)
    if len(table.rows) != expected:
        sys.exit(EXIT_INCOMPLETE)


def _run(cfg, save_trips):
    out = out_dir()
    trips = out / "trips" if save_trips else None
    try:
        table = harness.run_scenario(cfg, trips_dir=trips)
    except harness.MissingArtifactError as exc:
        raise click.ClickException(str(exc)) from exc
    _finish(table, cfg, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--trips/--no-trips", default=True, show_default=True,
              help="Write trips/*.csv for valid episodes.")
def run(config_path, trips):
    """Run a scenario described by a config file."""
    _run(harness.ScenarioConfig.load(config_path), trips)


@main.command()
@click.option("--scenario", type=click.Choice(harness.SCENARIOS), required=True)
@click.option("--maps", default="160", show_default=True, help="Comma-separated map seeds.")
@click.option("--iterations", type=int, default=harness.DEFAULT_ITERATIONS, show_default=True)
@click.option("--full", is_flag=True, help="Use 200 iterations per cell.")
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--grid", default="", help="JSON object overriding grid axes.")
@click.option("--trips/--no-trips", default=False, show_default=True)
def sweep(scenario, maps, iterations, full, seed, grid, trips):
    """Sweep one scenario over its parameter grid."""
    cfg = harness.ScenarioConfig(scenario, tuple(int(m) for m in maps.split(",") if m),
                                 json.loads(grid) if grid else {},
                                 200 if full else iterations, seed)
    cfg.save(out_dir() / "config.json")
    _run(cfg, trips)


@main.command()
@click.option("--trials", type=int, default=1_000_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def oracle(trials, seed):
    """Compare closed forms with simulation."""
    click.echo(f"{'quantity':<34}{'closed form':>14}{'simulated':>14}{'error':>12}")

    def line(name, exact, sim):
        click.echo(f"{name:<34}{exact:>14.6f}{sim:>14.6f}{sim - exact:>12.2e}")

    r = CostRange(0.0, 1.0)
    for m in (1, 2, 5, 10, 20, 100):
        est = monte_carlo_min(UniformCost(r), m, trials, seed=seed + m)
        line(f"min of {m} uniform", expected_min_uniform(m, r), est.mean)
    for gamma in (0.01, 0.1, 0.5):
        for m in (1, 10, 100):
            est = monte_carlo_min(CorridorCost(gamma, r), m, trials, seed=seed + m)
            line(f"corridor gamma={gamma} M={m}", expected_min_corridor(m, gamma, r), est.mean)
    for lam, mu in harness.QUEUE_GRID:
        q = QueueParams(lam, mu)
        _, soj = mm1_sojourn_times(lam, mu, trials, np.random.default_rng(seed))
        line(f"M/M/1 W (ms) lam={lam} mu={mu}", 1000 * mm1_metrics(q).W, 1000 * soj.mean())
        line(f"M/G/1 W (ms) lam={lam} mu={mu}", 1000 * mm1_metrics(q).W,
             1000 * mg1_metrics(q).W)
    delivered, _, _ = sample_links(PROFILE_A, trials, np.random.default_rng(seed))
    line("profile A delivery", PROFILE_A.delivery_prob, float(delivered.mean()))


@main.command()
@click.option("--kind", type=click.Choice(REPORT_KINDS), required=True)
@click.option("--results", type=click.Path(exists=True, dir_okay=False),
              help="results.csv for bars/heatmap.")
@click.option("--metric", default="mean_cost", show_default=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--path", "path_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--trip", type=click.Path(exists=True, dir_okay=False))
def report(kind, results, metric, map_path, path_file, trip):
    """Render bars, heatmaps or a map view into $EDGEMPC_OUT."""
    out = out_dir()
    try:
        if kind == "map_view":
            if map_path is None:
                raise click.UsageError("map_view needs --map")
            world = MapWorld.load(map_path)
            path = ReferencePath.load(path_file) if path_file else None
            episode = read_trip_csv(trip) if trip else None
            table = harness.ResultsTable.read_csv(results) if results else None
            files = emit_report(table, kind, out, world=world, path=path, episode=episode)
        else:
            if results is None:
                raise click.UsageError(f"{kind} needs --results")
            files = emit_report(harness.ResultsTable.read_csv(results), kind, out, metric)
    except ReportDimensionError as exc:
        raise click.ClickException(str(exc)) from exc
    for f in files:
        click.echo(f)


if __name__ == "__main__":
    main()
