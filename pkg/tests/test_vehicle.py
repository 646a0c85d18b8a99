import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgempc.geometry import HighCostRegion, MapWorld
from edgempc.vehicle import (MAX_STEERING, SPEED_PROFILES, WHEELBASE, Control,
                             LibraryGenerationError, MotionPrimitive, MotionPrimitiveLibrary,
                             VehicleState, generate_library, rollout, step_dynamics, wrap_angle)


def straight(h=10, v=0.01):
    return MotionPrimitive(0, np.column_stack([np.full(h, v), np.zeros(h)]))


def test_state_heading_is_wrapped_into_half_open_interval():
    assert VehicleState(0, 0, -math.pi).theta == pytest.approx(math.pi)
    assert VehicleState(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert VehicleState(0, 0, 0.5 + 2 * math.pi).theta == pytest.approx(0.5)


@given(st.floats(-50, 50, allow_nan=False))
def test_wrap_angle_range(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)


def test_control_limits():
    Control(0.01, MAX_STEERING)
    with pytest.raises(ValueError):
        Control(-0.01, 0.0)
    with pytest.raises(ValueError):
        Control(0.01, MAX_STEERING + 0.01)


def test_step_dynamics_hand_values():
    s1 = step_dynamics(VehicleState(0, 0, 0), Control(0.01, 0.1))
    # position moves along the old heading; heading gains v / L * tan(0.1)
    assert (s1.x, s1.y) == pytest.approx((0.01, 0.0))
    assert s1.theta == pytest.approx(0.01 / WHEELBASE * math.tan(0.1))
    s2 = step_dynamics(s1, Control(0.01, 0.1))
    assert s2.x == pytest.approx(0.01 + 0.01 * math.cos(s1.theta))
    assert s2.y == pytest.approx(0.01 * math.sin(s1.theta))


def test_speed_multiplier_scales_displacement():
    s = step_dynamics(VehicleState(0.2, 0.2, math.pi / 2), Control(0.01, 0.0), 0.5)
    assert (s.x, s.y) == pytest.approx((0.2, 0.205))


def test_straight_rollout_reaches_point_one():
    traj = rollout(VehicleState(0, 0, 0), straight())
    assert traj.states.shape == (11, 3)
    assert traj.states[-1, 0] == pytest.approx(0.1)
    assert np.array_equal(traj.states[0], [0.0, 0.0, 0.0])


def test_rollout_through_mud_halves_speed_inside():
    mud = HighCostRegion((0.34, 0.5), (0.02, 0.1), "mud", 0.5, 1.0)
    world = MapWorld(0, (), (0.1, 0.1), (0.9, 0.9), (mud,))
    traj = rollout(VehicleState(0.3, 0.5, 0.0), straight(), world)
    # two free steps to the boundary at x = 0.32, then eight half steps
    assert traj.states[-1, 0] == pytest.approx(0.36)
    assert traj.states[2, 0] == pytest.approx(0.32)


def test_rollout_stops_once_at_goal():
    traj = rollout(VehicleState(0, 0.5, 0), straight(), goal=(0.05, 0.5))
    # 0.03 away from (0.05, 0.5) is first undercut at x = 0.03
    assert traj.states[-1, 0] == pytest.approx(0.03)
    assert len(traj.states) == 11


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 0.015), min_size=10, max_size=10))
def test_zero_steering_displacement_is_sum_of_speeds(speeds):
    prim = MotionPrimitive(0, np.column_stack([speeds, np.zeros(10)]))
    traj = rollout(VehicleState(0.5, 0.5, 0.3), prim)
    disp = math.dist(traj.states[0, :2], traj.states[-1, :2])
    assert disp == pytest.approx(sum(speeds), abs=1e-12)


def test_library_shape_and_structure(library):
    assert len(library) == 1000
    assert library.horizon == 10
    assert np.all(library.controls[..., 0] == SPEED_PROFILES["normal"])
    assert np.all(np.abs(library.controls[..., 1]) <= MAX_STEERING + 1e-12)
    # two segments of five steps each, steering constant within a segment
    steer = library.controls[..., 1]
    assert np.all(steer[:, :5] == steer[:, :1])
    assert np.all(steer[:, 5:] == steer[:, 5:6])
    assert len({tuple(row) for row in steer}) == 1000


def test_library_is_reproducible_and_seed_dependent(library):
    assert generate_library() == library
    assert generate_library(seed=2) != library


def test_library_round_trip(tmp_path, library):
    library.save(tmp_path / "lib.json")
    assert MotionPrimitiveLibrary.load(tmp_path / "lib.json") == library
    text = (tmp_path / "lib.json").read_text()
    library.save(tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == text


def test_library_too_small_combinatorics():
    with pytest.raises(LibraryGenerationError):
        generate_library(segments=1, branches=32, n_primitives=1000)
    with pytest.raises(LibraryGenerationError):
        generate_library(speed_profile="warp")


def test_speed_profiles_share_steering(library):
    fast = library.with_speed_profile("high")
    slow = library.with_speed_profile("low")
    assert np.array_equal(fast.controls[..., 1], library.controls[..., 1])
    assert np.allclose(fast.controls[..., 0], 0.015)
    assert np.allclose(slow.controls[..., 0], 0.005)
    assert generate_library(speed_profile="high").controls[..., 1].tolist() == \
        fast.controls[..., 1].tolist()
