import math

import numpy as np
import pytest

from edgempc.cost import BARRIER
from edgempc.geometry import MapWorld, Obstacle
from edgempc.mpc import (BLIND_SPOT_PENALTY, CandidateResult, EdgeMPC, _argmin, aggregate,
                         best_candidate, read_trip_csv, run_episode, sample_indices, stream,
                         write_trip_csv)
from edgempc.planner import ReferencePath, plan_reference
from edgempc.vehicle import GOAL_TOLERANCE


@pytest.fixture(scope="module")
def empty_path(empty_world):
    return plan_reference(empty_world, max_iters=1500)


@pytest.fixture(scope="module")
def caged_world():
    """Start boxed in by four walls 0.025 away, so every primitive hits one."""
    walls = (Obstacle((0.5, 0.535), (0.05, 0.01)), Obstacle((0.5, 0.465), (0.05, 0.01)),
             Obstacle((0.535, 0.5), (0.01, 0.05)), Obstacle((0.465, 0.5), (0.01, 0.05)))
    return MapWorld(3, walls, (0.5, 0.5), (0.9, 0.9))


def test_sample_indices_shapes_and_support():
    rng = np.random.default_rng(0)
    assert sample_indices(np.full(10, 0.1), 0, rng).size == 0
    idx = sample_indices(np.full(10, 0.1), 500, rng)
    assert idx.min() >= 0 and idx.max() <= 9
    point = np.zeros(10)
    point[7] = 1.0
    assert np.all(sample_indices(point, 50, rng) == 7)
    with pytest.raises(ValueError):
        sample_indices(np.full(10, 0.2), 5, rng)
    with pytest.raises(ValueError):
        sample_indices(np.full(10, 0.1), -1, rng)


def test_streams_are_reproducible_and_distinct():
    assert stream(5, 0).random() == stream(5, 0).random()
    assert stream(5, 0).random() != stream(5, 1).random()


def test_argmin_ties_and_barrier():
    pick = _argmin(np.array([9, 4, 6]), np.array([1.0, 1.0, 2.0]), "agent")
    assert pick == CandidateResult(4, 1.0, "agent")
    assert _argmin(np.array([1, 2]), np.array([BARRIER, BARRIER + 5]), "agent") is None
    assert _argmin(np.array([], dtype=int), np.array([]), "agent") is None


def test_aggregate_takes_global_minimum():
    agent = CandidateResult(3, 5.0)
    edge = [CandidateResult(8, 2.0, "edge:0"), None, CandidateResult(1, 2.0, "edge:1")]
    assert aggregate(agent, edge) == CandidateResult(1, 2.0, "edge:1")
    assert aggregate(None, [None]) is None
    assert aggregate(agent, []) is agent


def test_more_candidates_never_cost_more(seeded_world, seeded_path, library):
    from edgempc.cost import CostContext
    from edgempc.mpc import start_state
    from edgempc.planner import reference_window
    s = start_state(seeded_world, seeded_path)
    window = reference_window(seeded_path, s)
    ctx = CostContext.agent(seeded_world)
    small = best_candidate(s, np.arange(20), library, seeded_world, window, ctx)
    big = best_candidate(s, np.arange(200), library, seeded_world, window, ctx)
    assert big.cost <= small.cost
    assert best_candidate(s, [], library, seeded_world, window, ctx) is None


def test_episode_on_empty_map_reaches_goal(empty_world, empty_path, library):
    res = run_episode(empty_world, empty_path, library, capacity=10, seed=3)
    assert res.valid and not res.collided and not res.deadlocked
    assert res.blind_spot_events == 0
    assert math.dist(res.final_state.position, empty_world.goal) < GOAL_TOLERANCE
    assert res.total_cost == pytest.approx(sum(r.step_cost for r in res.trip_log))
    assert res.steps == len(res.trip_log) < 200


def test_zero_capacity_is_all_blind_spots(empty_world, empty_path, library):
    res = run_episode(empty_world, empty_path, library, capacity=0, step_cap=5)
    assert res.steps == 5 and res.blind_spot_events == 5
    assert res.total_cost == 5 * BLIND_SPOT_PENALTY
    assert not res.valid and not res.deadlocked
    assert all(r.source == "recovery" and r.chosen_index == -1 for r in res.trip_log)


def test_caged_start_deadlocks_immediately(caged_world, library):
    path = ReferencePath(np.array([caged_world.start, caged_world.goal]))
    res = run_episode(caged_world, path, library, capacity=10)
    assert res.deadlocked and not res.valid
    assert res.steps == 1 and res.total_cost == BLIND_SPOT_PENALTY


def test_episode_is_deterministic(seeded_world, seeded_path, library):
    a = run_episode(seeded_world, seeded_path, library, capacity=10, seed=11)
    b = run_episode(seeded_world, seeded_path, library, capacity=10, seed=11)
    assert a.total_cost == b.total_cost and a.trip_log == b.trip_log


def test_trip_csv_round_trip(tmp_path, empty_world, empty_path, library):
    res = run_episode(empty_world, empty_path, library, capacity=10, seed=1)
    write_trip_csv(res, tmp_path / "t.csv")
    trip = read_trip_csv(tmp_path / "t.csv")
    assert [r.chosen_index for r in trip.trip_log] == [r.chosen_index for r in res.trip_log]
    assert [(r.x, r.y, r.theta) for r in trip.trip_log] == \
        [(r.x, r.y, r.theta) for r in res.trip_log]
    assert trip.total_cost == pytest.approx(res.total_cost)


def test_estimator_interface(empty_world, empty_path, library):
    est = EdgeMPC(capacity=10, random_state=2).fit(empty_world, empty_path, library)
    assert est.get_params()["capacity"] == 10
    picks = est.predict([[0.1, 0.5, 0.0], [0.5, 0.5, 0.0]])
    assert picks.shape == (2,) and np.all((picks >= 0) & (picks < len(library)))
    assert est.run(seed=4).total_cost == run_episode(empty_world, empty_path, library, 10,
                                                     seed=4).total_cost
    with pytest.raises(ValueError):
        EdgeMPC(capacity=-1).fit(empty_world, empty_path, library)
