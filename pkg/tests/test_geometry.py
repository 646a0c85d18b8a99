import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgempc.geometry import (ENDPOINT_CLEARANCE, MIN_START_GOAL_SEPARATION, HighCostRegion,
                              MapGenerationError, MapWorld, Obstacle, clearance, first_collision,
                              generate_map, in_collision, line_of_sight, region_at)

unit = st.floats(0.0, 1.0, allow_nan=False)
points = st.tuples(unit, unit)


def test_generated_map_has_fifty_obstacles_inside_the_square():
    world = generate_map(160)
    assert len(world.obstacles) == 50
    b = world.obstacle_bounds
    assert (b[:, :2] >= 0).all() and (b[:, 2:] <= 1).all()
    assert (b[:, 2:] > b[:, :2]).all()


def test_start_and_goal_are_free_and_far_apart():
    for seed in (160, 1, 42):
        world = generate_map(seed)
        assert math.dist(world.start, world.goal) >= MIN_START_GOAL_SEPARATION
        for p in (world.start, world.goal):
            assert clearance(world, p) + 0.01 >= ENDPOINT_CLEARANCE - 1e-12
            assert not in_collision(world, p)


def test_same_seed_gives_byte_identical_maps():
    assert generate_map(42).dumps() == generate_map(42).dumps()
    assert generate_map(42).dumps() != generate_map(43).dumps()


def test_zero_obstacles_gives_free_straight_line():
    world = generate_map(7, 0)
    assert world.obstacles == ()
    assert line_of_sight(world, world.start, world.goal)


def test_negative_obstacle_count_is_rejected():
    with pytest.raises(ValueError):
        generate_map(1, -1)


def test_crowded_map_fails_with_seed_in_message(monkeypatch):
    import edgempc.geometry as geo
    monkeypatch.setattr(geo, "MAX_PLACEMENT_ATTEMPTS", 3)
    monkeypatch.setattr(geo, "HALF_EXTENT_RANGE", (0.3, 0.3))
    with pytest.raises(MapGenerationError, match="seed 5"):
        geo.generate_map(5, 40)


def test_map_round_trip(tmp_path, hidden_region_world):
    path = tmp_path / "m.json"
    hidden_region_world.save(path)
    back = MapWorld.load(path)
    assert back == hidden_region_world
    assert back.dumps() == hidden_region_world.dumps()


def test_line_of_sight_blocked_by_center_box(box_world):
    assert not line_of_sight(box_world, (0.1, 0.5), (0.9, 0.5))
    assert line_of_sight(box_world, (0.1, 0.1), (0.9, 0.1))
    assert line_of_sight(box_world, (0.2, 0.2), (0.2, 0.2))


def test_line_of_sight_grazing_an_edge_is_clear(box_world):
    # the segment runs along the box's top edge, never through its interior
    assert line_of_sight(box_world, (0.1, 0.6), (0.9, 0.6))


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_line_of_sight_is_symmetric(a, b):
    world = generate_map(3)
    assert line_of_sight(world, a, b) == line_of_sight(world, b, a)


def test_first_collision_cases(box_world, empty_world):
    straight = np.column_stack([np.linspace(0.1, 0.9, 11), np.full(11, 0.5), np.zeros(11)])
    assert first_collision(straight, empty_world) is None
    # x = 0.1, 0.15, ..., the footprint touches the box (x >= 0.39) at step 6 (x = 0.4)
    xs = 0.1 + 0.05 * np.arange(11)
    traj = np.column_stack([xs, np.full(11, 0.5), np.zeros(11)])
    assert first_collision(traj, box_world) == 6
    inside = np.array([[0.5, 0.5, 0.0], [0.9, 0.9, 0.0]])
    assert first_collision(inside, box_world) == 0
    with pytest.raises(ValueError):
        first_collision(np.zeros((0, 3)), box_world)


@settings(max_examples=100, deadline=None)
@given(st.lists(points, min_size=1, max_size=12))
def test_collision_free_trajectory_has_collision_free_prefixes(pts):
    world = generate_map(3)
    traj = np.column_stack([np.array(pts), np.zeros(len(pts))])
    if first_collision(traj, world) is None:
        for k in range(1, len(pts) + 1):
            assert first_collision(traj[:k], world) is None


def test_region_lookup_is_closed():
    icy = HighCostRegion((0.5, 0.5), (0.1, 0.1), "icy", 1.5, 2.0)
    world = MapWorld(0, (), (0.1, 0.1), (0.9, 0.9), (icy,))
    assert region_at(world, (0.5, 0.5)) is icy
    assert region_at(world, (0.6, 0.45)) is icy
    assert region_at(world, (0.61, 0.5)) is None


def test_region_kind_constraints():
    with pytest.raises(ValueError):
        HighCostRegion((0.5, 0.5), (0.1, 0.1), "icy", 0.8, 1.0)
    with pytest.raises(ValueError):
        HighCostRegion((0.5, 0.5), (0.1, 0.1), "mud", 1.2, 1.0)
    with pytest.raises(ValueError):
        HighCostRegion((0.5, 0.5), (0.1, 0.1), "sand", 0.5, 1.0)


def test_clearance_counts_walls_and_footprint(box_world):
    assert clearance(box_world, (0.05, 0.05)) == pytest.approx(0.04)
    assert clearance(box_world, (0.5, 0.65)) == pytest.approx(0.04)
    assert Obstacle((0.5, 0.5), (0.1, 0.2)).bounds == pytest.approx((0.4, 0.3, 0.6, 0.7))
