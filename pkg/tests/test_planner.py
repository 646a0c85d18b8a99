import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgempc.geometry import FOOTPRINT_RADIUS, MapWorld, Obstacle, line_of_sight
from edgempc.planner import (PlanningError, ReferencePath, RRTStarPlanner, plan_reference,
                             reference_window, resample_polyline)
from edgempc.vehicle import VehicleState


def test_empty_map_path_is_near_straight(empty_world):
    path = plan_reference(empty_world, max_iters=1500)
    straight = math.dist(empty_world.start, empty_world.goal)
    assert path.length <= 1.05 * straight
    assert np.allclose(path.waypoints[0], empty_world.start)
    assert math.dist(path.waypoints[-1], empty_world.goal) <= 0.03


def test_enclosed_goal_is_unreachable():
    walls = (Obstacle((0.8, 0.7), (0.15, 0.02)), Obstacle((0.8, 0.3), (0.15, 0.02)),
             Obstacle((0.67, 0.5), (0.02, 0.2)), Obstacle((0.93, 0.5), (0.02, 0.2)))
    world = MapWorld(1, walls, (0.1, 0.5), (0.8, 0.5))
    with pytest.raises(PlanningError, match="seed 1"):
        plan_reference(world, max_iters=500)


def test_planner_is_deterministic_and_clear(seeded_world, seeded_path):
    again = plan_reference(seeded_world)
    assert np.array_equal(again.waypoints, seeded_path.waypoints)
    wp = seeded_path.waypoints
    for a, b in zip(wp[:-1], wp[1:]):
        assert line_of_sight(seeded_world, a, b, inflation=FOOTPRINT_RADIUS)
    assert np.all(np.diff(seeded_path.arclength) > 0)


def test_estimator_wrapper(seeded_world, seeded_path):
    est = RRTStarPlanner().fit(seeded_world)
    assert np.array_equal(est.path_.waypoints, seeded_path.waypoints)
    assert est.get_params()["max_iters"] == 5000
    windows = est.transform([[*seeded_world.start, 0.0]])
    assert len(windows) == 1 and windows[0].shape[1] == 2


def test_path_round_trip(tmp_path, seeded_path):
    seeded_path.save(tmp_path / "p.json")
    assert np.array_equal(ReferencePath.load(tmp_path / "p.json").waypoints, seeded_path.waypoints)


@pytest.fixture
def l_path():
    return ReferencePath(np.array([[0.0, 0.0], [0.1, 0.0], [0.1, 0.1]]))


def test_window_clamps_to_whole_path(l_path):
    w = reference_window(l_path, VehicleState(0, 0, 0), horizon=30)
    assert np.allclose(w, l_path.waypoints)


def test_window_starting_on_a_waypoint(l_path):
    w = reference_window(l_path, VehicleState(0.1, 0.0, 0), horizon=5)
    assert np.allclose(w[0], [0.1, 0.0])
    assert np.allclose(w[-1], [0.1, 0.05])


def test_window_starts_at_the_perpendicular_foot(l_path):
    w = reference_window(l_path, VehicleState(0.04, 0.03, 0), horizon=3)
    assert np.allclose(w[0], [0.04, 0.0])
    assert np.allclose(w[-1], [0.07, 0.0])


def test_projection_tie_goes_forward():
    # (0.05, 0.05) is equidistant from both legs of the L
    path = ReferencePath(np.array([[0.0, 0.0], [0.1, 0.0], [0.1, 0.1]]))
    path2 = ReferencePath(np.array([[0.0, 0.1], [0.0, 0.0], [0.1, 0.0]]))
    assert path.project((0.05, 0.05)) == pytest.approx(0.15)
    assert path2.project((0.05, 0.05)) == pytest.approx(0.15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_projection_is_no_farther_than_any_vertex(x, y):
    path = _fixed_path()
    s = path.project((x, y))
    foot = path.point_at(s)
    d_foot = math.dist(foot, (x, y))
    assert all(d_foot <= math.dist(v, (x, y)) + 1e-12 for v in path.waypoints)


def _fixed_path():
    return ReferencePath(np.array([[0.1, 0.1], [0.4, 0.2], [0.5, 0.6], [0.9, 0.8]]))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 40))
def test_window_is_contiguous_sub_polyline(x, y, h):
    path = _fixed_path()
    w = reference_window(path, (x, y), horizon=h)
    arc = np.concatenate([[0], np.cumsum(np.hypot(*np.diff(w, axis=0).T))]) if len(w) > 1 else [0]
    s0 = path.project((x, y))
    expected = min(h * 0.01, path.length - s0)
    assert arc[-1] == pytest.approx(expected, abs=1e-9)
    # every window point lies on the path at increasing arclength
    s = [path.project(p) for p in w]
    assert np.all(np.diff(s) >= -1e-9)


def test_resample_polyline_even_spacing():
    pts = resample_polyline([[0, 0], [1, 0], [1, 1]], 5)
    assert np.allclose(pts, [[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1]])
    assert np.allclose(resample_polyline([[0.2, 0.3]], 3), [[0.2, 0.3]] * 3)
