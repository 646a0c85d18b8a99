import re

import numpy as np
import pytest

from edgempc.harness import ResultsTable, ScenarioConfig, cell_label, scenario_cells
from edgempc.report import (ReportDimensionError, bar_chart, emit_report, heatmap, map_view,
                            parse_cell)


def fake_table(scenario):
    cells = scenario_cells(ScenarioConfig(scenario))
    rows = [{"scenario": scenario, "cell": cell_label(c), "map_seed": 1, "iterations": 2,
             "n_valid": 2, "mean_cost": float(100 - i), "validity_rate": 1.0, "pof": 0.0,
             "blind_spot_rate": 0.0} for i, c in enumerate(cells)]
    return ResultsTable(scenario, rows)


def test_parse_cell():
    assert parse_cell("beta=0.5;omega=180") == {"beta": "0.5", "omega": "180"}
    assert parse_cell("lam_mu=10/100;N=5")["lam_mu"] == "10/100"


def test_capacity_bars(tmp_path):
    files = emit_report(fake_table("capacity"), "bars", tmp_path)
    assert [f.name for f in files] == ["results.csv", "capacity_bars.svg"]
    svg = (tmp_path / "capacity_bars.svg").read_text()
    assert svg.count('class="bar"') == 6
    assert len((tmp_path / "results.csv").read_text().splitlines()) == 7


def test_histories_heatmap_is_nine_by_nine():
    svg = heatmap(fake_table("histories").rows)
    assert svg.count('class="cell"') == 81
    rows = re.findall(r'class="row-label"[^>]*>([^<]*)<', svg)
    cols = re.findall(r'class="col-label"[^>]*>([^<]*)<', svg)
    assert rows == [str(b) for b in (0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0)]
    assert cols == ["180", "540", "900", "1260", "1800", "2340", "2700", "3060", "3600"]


def test_dimension_mismatch():
    with pytest.raises(ReportDimensionError):
        heatmap(fake_table("capacity").rows)
    with pytest.raises(ReportDimensionError):
        bar_chart(fake_table("histories").rows)


def test_empty_table_is_refused(tmp_path):
    with pytest.raises(ValueError):
        emit_report(ResultsTable("capacity"), "bars", tmp_path)


def test_map_view_draws_every_obstacle(seeded_world, seeded_path, tmp_path):
    traj = np.array([seeded_world.start, seeded_world.goal])
    svg = map_view(seeded_world, seeded_path, traj)
    assert svg.count('class="obstacle"') == len(seeded_world.obstacles) == 50
    assert 'class="reference"' in svg and 'class="trajectory"' in svg
    files = emit_report(None, "map_view", tmp_path, world=seeded_world, path=seeded_path)
    assert files[0].name == f"map_{seeded_world.seed}.svg"
