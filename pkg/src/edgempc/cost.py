"""Linear feature-weighted trajectory cost and its agent/edge/true variants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import evaluate_batch
from .geometry import FOOTPRINT_RADIUS, clearance, first_collision, region_at
from .planner import resample_polyline
from .vehicle import GOAL_TOLERANCE, WHEELBASE

D_SAFE = 0.03
BARRIER = 1e6
FEATURE_NAMES = ("frechet", "steering_mag", "goal_distance", "obstacle_proximity",
                 "collision_prob", "extra_penalty")
CONTEXT_MODES = ("true", "pessimistic", "enhanced")


def discrete_frechet(a, b):
    """Discrete Fréchet distance between two polylines (Eiter & Mannila DP).

    >>> discrete_frechet([[0, 0], [1, 0]], [[0, 1], [1, 1]])
    1.0
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("polylines must be non-empty")
    dist = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    ca = np.empty_like(dist)
    ca[0] = np.maximum.accumulate(dist[0])
    for i in range(1, len(a)):
        ca[i, 0] = max(ca[i - 1, 0], dist[i, 0])
        for j in range(1, len(b)):
            ca[i, j] = max(min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]), dist[i, j])
    return float(ca[-1, -1])


@dataclass(frozen=True)
class FeatureVector:
    frechet: float
    steering_mag: float
    goal_distance: float
    obstacle_proximity: float
    collision_prob: float
    extra_penalty: float

    def as_array(self):
        return np.array([getattr(self, n) for n in FEATURE_NAMES])


@dataclass(frozen=True, eq=False)
class CostWeights:
    w_far: np.ndarray = field(default_factory=lambda: np.array([10.0, 1.0, 5.0, 3.0, 100.0, 1.0]))
    w_near: np.ndarray = field(default_factory=lambda: np.array([2.0, 1.0, 20.0, 3.0, 100.0, 1.0]))

    def __post_init__(self):
        for name in ("w_far", "w_near"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.shape != (6,) or np.any(w < 0):
                raise ValueError(f"{name} must hold 6 non-negative weights")
            object.__setattr__(self, name, w)

    def select(self, clear_sight):
        return self.w_near if clear_sight else self.w_far

    def to_dict(self):
        return {"w_far": self.w_far.tolist(), "w_near": self.w_near.tolist()}


@dataclass(frozen=True)
class CostContext:
    """Which high-cost regions an evaluator knows about, and how it treats the rest.

    ``pessimistic`` charges the worst unknown region's rate on every horizon
    step; ``enhanced`` and ``true`` charge only steps actually spent in known
    regions.
    """

    mode: str
    known_regions: tuple = ()
    unknown_regions: tuple = ()

    def __post_init__(self):
        if self.mode not in CONTEXT_MODES:
            raise ValueError(f"unknown cost context mode {self.mode!r}")

    @classmethod
    def agent(cls, world):
        regions = world.high_cost_regions
        return cls("pessimistic", tuple(r for r in regions if not r.hidden),
                   tuple(r for r in regions if r.hidden))

    @classmethod
    def edge(cls, world):
        return cls("enhanced", tuple(world.high_cost_regions))

    @classmethod
    def true(cls, world):
        return cls("true", tuple(world.high_cost_regions))

    def worst_case_rate(self):
        if self.mode != "pessimistic" or not self.unknown_regions:
            return 0.0
        return max(r.region_cost_rate for r in self.unknown_regions)

    def extra_penalty(self, region_steps, regions, horizon):
        """Vectorized penalty from per-region step counts (M, R) over ``regions``."""
        rates = np.array([r.region_cost_rate if r in self.known_regions else 0.0
                          for r in regions])
        penalty = region_steps @ rates if len(regions) else np.zeros(len(region_steps))
        return penalty + self.worst_case_rate() * horizon


def compute_features(traj, window, world, ctx, goal):
    """Six-feature description of one predicted trajectory (reference path)."""
    states = traj.states
    horizon = len(states) - 1
    pos = states[:, :2]
    ref = resample_polyline(window, horizon + 1)
    clear = clearance(world, pos[1:])
    # steps taken before the rollout first stood within tolerance of the goal
    at_goal = np.hypot(*(pos[:-1] - np.asarray(goal, dtype=float)).T) < GOAL_TOLERANCE
    moving = ~np.logical_or.accumulate(at_goal)
    collided = first_collision(traj, world) is not None
    steps_in = {}
    for p in pos[1:]:
        region = region_at(world, p)
        if region is not None:
            steps_in[region] = steps_in.get(region, 0) + 1
    extra = sum(n * r.region_cost_rate for r, n in steps_in.items() if r in ctx.known_regions)
    extra += ctx.worst_case_rate() * horizon
    return FeatureVector(
        frechet=discrete_frechet(pos, ref),
        steering_mag=float(np.abs(traj.controls[moving, 1]).sum()),
        goal_distance=float(np.hypot(*(pos[-1] - np.asarray(goal)))),
        obstacle_proximity=float(np.maximum(0.0, D_SAFE - clear).sum() / D_SAFE),
        collision_prob=1.0 if collided else float(np.mean(clear < D_SAFE / 2)),
        extra_penalty=float(extra),
    )


def trajectory_cost(f, w, clear_sight, collided=None):
    """w . f with the near/far weight set, plus a barrier for colliding candidates.

    ``collided`` defaults to ``collision_prob >= 1``; pass the flags explicitly
    when a collision-free candidate can be near obstacles on every step.
    """
    arr = f.as_array() if isinstance(f, FeatureVector) else np.asarray(f, dtype=float)
    cost = arr @ w.select(clear_sight)
    if collided is None:
        collided = arr[..., 4] >= 1.0
    return cost + BARRIER * np.asarray(collided, dtype=float)


class CandidateEvaluator:
    """Batch rollout + costing of library primitives against one world."""

    def __init__(self, world, library, weights=None):
        self.world = world
        self.library = library
        self.weights = weights if weights is not None else CostWeights()
        self._obstacles = np.ascontiguousarray(world.obstacle_bounds)
        self._regions = np.ascontiguousarray(world.region_table)
        self._goal = tuple(map(float, world.goal))

    @property
    def horizon(self):
        return self.library.horizon

    def evaluate(self, state, indices, window):
        """Rollouts and context-free parts for ``indices`` from ``state``."""
        x, y, th = (state.x, state.y, state.theta) if hasattr(state, "x") else state
        controls = np.ascontiguousarray(self.library.controls[np.asarray(indices, dtype=np.intp)])
        ref = np.ascontiguousarray(resample_polyline(window, self.horizon + 1))
        return evaluate_batch(float(x), float(y), float(th), controls, self._obstacles,
                              self._regions, ref, self._goal[0], self._goal[1], WHEELBASE,
                              FOOTPRINT_RADIUS, D_SAFE, GOAL_TOLERANCE)

    def features(self, base, region_steps, ctx):
        extra = ctx.extra_penalty(region_steps, self.world.high_cost_regions, self.horizon)
        return np.column_stack([base, extra])

    def costs(self, base, region_steps, collided, ctx, clear_sight):
        return trajectory_cost(self.features(base, region_steps, ctx), self.weights, clear_sight,
                               collided)
