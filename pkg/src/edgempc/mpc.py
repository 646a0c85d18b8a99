"""Sampling-based receding-horizon loop with edge-response aggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative_int, check_pmf, check_rng, check_states
from .cost import BARRIER, CandidateEvaluator, CostContext, CostWeights
from .geometry import in_collision, line_of_sight, region_at
from .planner import RRTStarPlanner, reference_window
from .priors import uniform_pmf
from .vehicle import GOAL_TOLERANCE, VehicleState, generate_library, step_dynamics

STEP_CAP = 1000
BLIND_SPOT_PENALTY = 50.0
TRIP_COLUMNS = ("step", "x", "y", "theta", "chosen_index", "source", "step_cost", "blind_spot",
                "connected")


@dataclass(frozen=True)
class CandidateResult:
    primitive_index: int
    cost: float
    source: str = "agent"


@dataclass(frozen=True)
class StepRecord:
    """One executed step: the state it started from and what was done there."""

    step: int
    x: float
    y: float
    theta: float
    chosen_index: int
    source: str
    step_cost: float
    blind_spot: bool
    connected: tuple = ()
    planned_cost: float = math.nan


@dataclass
class EpisodeResult:
    total_cost: float
    steps: int
    valid: bool
    blind_spot_events: int
    collided: bool = False
    deadlocked: bool = False
    trip_log: list = field(default_factory=list)
    edge_log: list = field(default_factory=list)
    final_state: VehicleState | None = None


@dataclass(frozen=True)
class PriorConfig:
    """Prior-driven sampling for an episode: a fitted store and its mixing weight."""

    store: object
    beta: float
    apply_to_agent: bool = True

    def pmf(self, state):
        return self.store.pmf(state, beta=self.beta)


def stream(seed, *key):
    """Independent Generator for a labelled sub-stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sample_indices(pmf, n, rng):
    """``n`` i.i.d. primitive indices drawn from ``pmf`` (with replacement)."""
    n = check_nonnegative_int(n, "n")
    pmf = check_pmf(pmf)
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    if np.ptp(pmf) == 0.0:
        return rng.integers(0, len(pmf), size=n)
    return rng.choice(len(pmf), size=n, p=pmf)


def _argmin(indices, costs, source):
    if len(indices) == 0:
        return None
    order = np.lexsort((indices, costs))
    best = order[0]
    if costs[best] >= BARRIER:
        return None
    return CandidateResult(int(indices[best]), float(costs[best]), source)


def best_candidate(s, indices, library, world, window, ctx, weights=None, clear_sight=None,
                   evaluator=None, source="agent"):
    """Cheapest non-colliding candidate among ``indices``; ties go to the smaller index."""
    indices = np.asarray(indices, dtype=np.intp)
    if indices.size == 0:
        return None
    if evaluator is None:
        evaluator = CandidateEvaluator(world, library, weights)
    if clear_sight is None:
        clear_sight = line_of_sight(world, (s.x, s.y) if hasattr(s, "x") else s[:2], world.goal)
    _, base, region_steps, collided = evaluator.evaluate(s, indices, window)
    costs = evaluator.costs(base, region_steps, collided, ctx, clear_sight)
    return _argmin(indices, costs, source)


def aggregate(agent, edge_responses):
    """Global minimum over the agent's pick and every delivered edge pick."""
    pool = [c for c in (agent, *edge_responses) if c is not None]
    if not pool:
        return None
    return min(pool, key=lambda c: (c.cost, c.primitive_index))


def start_state(world, path):
    wp = path.waypoints
    heading = math.atan2(wp[1, 1] - wp[0, 1], wp[1, 0] - wp[0, 0]) if len(wp) > 1 else 0.0
    return VehicleState(world.start[0], world.start[1], heading)


def run_episode(world, path, library, capacity=10, network=None, prior=None, weights=None,
                step_cap=STEP_CAP, seed=0, goal_tolerance=GOAL_TOLERANCE,
                blind_spot_penalty=BLIND_SPOT_PENALTY):
    """Drive from start to goal with the agent plus any connected edge nodes.

    ``network`` is an ``EdgeNetwork`` (or None for standard MPC); ``prior`` a
    ``PriorConfig`` or None. Executed steps are charged their true-context cost.
    """
    capacity = check_nonnegative_int(capacity, "capacity")
    evaluator = CandidateEvaluator(world, library, weights)
    agent_ctx = CostContext.agent(world)
    true_ctx = CostContext.true(world)
    horizon = library.horizon
    n_prim = len(library)
    uniform = uniform_pmf(n_prim)
    agent_rng = stream(seed, 0)
    session = network.session(seed) if network is not None else None
    goal = np.asarray(world.goal, dtype=float)

    state = start_state(world, path)
    total = 0.0
    blind = 0
    collided = deadlocked = False
    trip_log, edge_log = [], []
    steps = 0
    while steps < step_cap:
        if math.dist(state.position, goal) < goal_tolerance:
            break
        window = reference_window(path, state, horizon)
        clear = line_of_sight(world, state.position, world.goal)
        if prior is not None and prior.apply_to_agent:
            pmf = prior.pmf(state)
        else:
            pmf = uniform
        agent_pick = best_candidate(state, sample_indices(pmf, capacity, agent_rng), library,
                                    world, window, agent_ctx, clear_sight=clear,
                                    evaluator=evaluator, source="agent")
        responses, connected = [], ()
        if session is not None:
            responses, records = session.respond_all(state, steps, window, evaluator, clear, prior)
            edge_log.extend(records)
            connected = tuple(r.node_id for r in records)
        winner = aggregate(agent_pick, responses)

        if winner is None:
            blind += 1
            step_cost = blind_spot_penalty
            trip_log.append(StepRecord(steps, state.x, state.y, state.theta, -1, "recovery",
                                       step_cost, True, connected))
            # recovery holds the state, so with no free primitive at all it never ends
            if len(trip_log) == 1 or not trip_log[-2].blind_spot:
                deadlocked = bool(evaluator.evaluate(state, np.arange(n_prim), window)[3].all())
        else:
            _, base, region_steps, hit = evaluator.evaluate(state, [winner.primitive_index], window)
            step_cost = float(evaluator.costs(base, region_steps, hit, true_ctx, clear)[0])
            trip_log.append(StepRecord(steps, state.x, state.y, state.theta,
                                       winner.primitive_index, winner.source, step_cost, False,
                                       connected, winner.cost))
            region = region_at(world, state.position)
            u0 = library.controls[winner.primitive_index, 0]
            state = step_dynamics(state, u0, region.speed_multiplier if region else 1.0)
        total += step_cost
        steps += 1
        if in_collision(world, np.array(state.position)):
            collided = True
            break
        if deadlocked:
            break

    valid = (not collided) and (not deadlocked) and math.dist(state.position, goal) < goal_tolerance
    return EpisodeResult(total, steps, valid, blind, collided, deadlocked, trip_log, edge_log, state)


def write_trip_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIP_COLUMNS)
        for r in result.trip_log:
            writer.writerow([r.step, repr(float(r.x)), repr(float(r.y)), repr(float(r.theta)),
                             r.chosen_index, r.source, repr(float(r.step_cost)), int(r.blind_spot),
                             ";".join(map(str, r.connected))])


@dataclass
class Trip:
    """A trip log read back from CSV; trip files hold successful episodes."""

    trip_log: list
    valid: bool = True

    @property
    def total_cost(self):
        return sum(r.step_cost for r in self.trip_log)


def read_trip_csv(path):
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            connected = tuple(int(v) for v in row.get("connected", "").split(";") if v)
            records.append(StepRecord(int(row["step"]), float(row["x"]), float(row["y"]),
                                      float(row["theta"]), int(row["chosen_index"]), row["source"],
                                      float(row["step_cost"]), bool(int(row["blind_spot"])),
                                      connected))
    return Trip(records)


def read_trip_dir(directory):
    return [read_trip_csv(p) for p in sorted(Path(directory).glob("*.csv"))]


class EdgeMPC(BaseEstimator):
    """Sampling MPC planner with an estimator interface.

    ``fit(world)`` plans the reference path and builds the primitive library;
    ``predict(states)`` returns the agent's chosen primitive index per state
    (-1 at a blind spot); ``run`` plays a full episode.
    """

    def __init__(self, capacity=10, weights=None, step_cap=STEP_CAP,
                 blind_spot_penalty=BLIND_SPOT_PENALTY, goal_tolerance=GOAL_TOLERANCE,
                 library_seed=1, planner_seed=0, random_state=0):
        self.capacity = capacity
        self.weights = weights
        self.step_cap = step_cap
        self.blind_spot_penalty = blind_spot_penalty
        self.goal_tolerance = goal_tolerance
        self.library_seed = library_seed
        self.planner_seed = planner_seed
        self.random_state = random_state

    def fit(self, world, path=None, library=None):
        check_nonnegative_int(self.capacity, "capacity")
        self.world_ = world
        self.path_ = path if path is not None else \
            RRTStarPlanner(random_state=self.planner_seed).fit(world).path_
        self.library_ = library if library is not None else generate_library(seed=self.library_seed)
        self.weights_ = self.weights if self.weights is not None else CostWeights()
        self.evaluator_ = CandidateEvaluator(world, self.library_, self.weights_)
        return self

    def predict(self, states):
        check_is_fitted(self, "evaluator_")
        states = check_states(states)
        rng = check_rng(self.random_state)
        ctx = CostContext.agent(self.world_)
        uniform = uniform_pmf(len(self.library_))
        out = np.empty(len(states), dtype=np.intp)
        for i, s in enumerate(states):
            window = reference_window(self.path_, s, self.library_.horizon)
            pick = best_candidate(s, sample_indices(uniform, self.capacity, rng), self.library_,
                                  self.world_, window, ctx, evaluator=self.evaluator_)
            out[i] = -1 if pick is None else pick.primitive_index
        return out

    def run(self, network=None, prior=None, seed=None):
        check_is_fitted(self, "evaluator_")
        return run_episode(self.world_, self.path_, self.library_, self.capacity, network, prior,
                           self.weights_, self.step_cap,
                           self.random_state if seed is None else seed,
                           self.goal_tolerance, self.blind_spot_penalty)
