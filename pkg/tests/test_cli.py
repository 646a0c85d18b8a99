import json

import pytest
from click.testing import CliRunner

from edgempc.cli import EXIT_INCOMPLETE, main
from edgempc.harness import ScenarioConfig

from .conftest import PLANNABLE_SEED


@pytest.fixture
def invoke(tmp_path):
    runner = CliRunner()

    def call(*args):
        return runner.invoke(main, list(args), env={"EDGEMPC_OUT": str(tmp_path)})
    return call


def test_gen_map_plan_and_map_view(invoke, tmp_path):
    res = invoke("gen-map", "--seed", str(PLANNABLE_SEED))
    assert res.exit_code == 0, res.output
    map_file = tmp_path / "maps" / f"map_{PLANNABLE_SEED}.json"
    assert map_file.exists()
    res = invoke("plan", "--map", str(map_file))
    assert res.exit_code == 0, res.output
    path_file = map_file.with_name(f"path_{PLANNABLE_SEED}.json")
    res = invoke("report", "--kind", "map_view", "--map", str(map_file), "--path", str(path_file))
    assert res.exit_code == 0, res.output
    assert (tmp_path / f"map_{PLANNABLE_SEED}.svg").read_text().count('class="obstacle"') == 50


def test_unplannable_map_exits_nonzero(invoke, tmp_path):
    from edgempc.geometry import MapWorld, Obstacle
    walls = (Obstacle((0.8, 0.7), (0.15, 0.02)), Obstacle((0.8, 0.3), (0.15, 0.02)),
             Obstacle((0.67, 0.5), (0.02, 0.2)), Obstacle((0.93, 0.5), (0.02, 0.2)))
    MapWorld(1, walls, (0.1, 0.5), (0.8, 0.5)).save(tmp_path / "walled.json")
    res = invoke("plan", "--map", str(tmp_path / "walled.json"))
    assert res.exit_code == EXIT_INCOMPLETE


def test_gen_library_params(invoke, tmp_path):
    res = invoke("gen-library", "--params", "K=64,branches=8")
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "library.json").read_text())
    assert doc["params"]["K"] == 64


def test_sweep_writes_results_and_bars(invoke, tmp_path):
    res = invoke("sweep", "--scenario", "capacity", "--maps", str(PLANNABLE_SEED),
                 "--iterations", "1", "--grid", '{"c": [0, 20]}', "--trips")
    assert res.exit_code == 0, res.output
    assert len((tmp_path / "results.csv").read_text().splitlines()) == 3
    assert (tmp_path / "capacity_bars.svg").exists()
    assert list((tmp_path / "trips").glob("*.csv"))


def test_run_from_config_and_rerun_is_identical(invoke, tmp_path):
    cfg = ScenarioConfig("availability", map_seeds=(PLANNABLE_SEED,), grid={"p": (0.0, 1.0)},
                         iterations=1)
    cfg.save(tmp_path / "cfg.json")
    assert invoke("run", "--config", str(tmp_path / "cfg.json"), "--no-trips").exit_code == 0
    first = (tmp_path / "results.csv").read_bytes()
    assert invoke("run", "--config", str(tmp_path / "cfg.json"), "--no-trips").exit_code == 0
    assert (tmp_path / "results.csv").read_bytes() == first


def test_missing_cells_exit_nonzero(invoke, monkeypatch):
    import edgempc.harness as harness
    from edgempc.planner import PlanningError

    def refuse(world, map_dir=None):
        raise PlanningError("no path")
    monkeypatch.setattr(harness, "reference_for", refuse)
    res = invoke("sweep", "--scenario", "capacity", "--maps", "3", "--iterations", "1")
    assert res.exit_code == EXIT_INCOMPLETE


def test_heatmap_on_one_dimensional_results_fails(invoke, tmp_path):
    invoke("sweep", "--scenario", "capacity", "--maps", str(PLANNABLE_SEED), "--iterations", "1",
           "--grid", '{"c": [0]}')
    res = invoke("report", "--kind", "heatmap", "--results", str(tmp_path / "results.csv"))
    assert res.exit_code == 1 and "two-dimensional" in res.output


def test_oracle_table(invoke):
    res = invoke("oracle", "--trials", "2000")
    assert res.exit_code == 0
    assert "min of 100 uniform" in res.output and "M/M/1" in res.output
