"""Unit-square maps: procedural generation, obstacle and region queries, serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import check_nonnegative_int, check_point

MAP_FORMAT_VERSION = 1

#: Radius of the disc used as the vehicle footprint for collision checks.
FOOTPRINT_RADIUS = 0.01
HALF_EXTENT_RANGE = (0.01, 0.05)
MIN_START_GOAL_SEPARATION = 0.5
MAX_PLACEMENT_ATTEMPTS = 10_000
#: Start and goal must keep this clearance from every obstacle surface.
ENDPOINT_CLEARANCE = 0.03


class MapGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle."""

    center: tuple[float, float]
    half_extents: tuple[float, float]

    def __post_init__(self):
        if self.half_extents[0] <= 0 or self.half_extents[1] <= 0:
            raise ValueError("obstacle half extents must be positive")

    @property
    def bounds(self):
        (cx, cy), (w, h) = self.center, self.half_extents
        return (cx - w, cy - h, cx + w, cy + h)


@dataclass(frozen=True)
class HighCostRegion:
    """Rectangular patch with altered traction and a per-step cost.

    ``hidden`` regions are unknown to the agent and only observed by edge nodes.
    """

    center: tuple[float, float]
    half_extents: tuple[float, float]
    kind: str
    speed_multiplier: float
    region_cost_rate: float
    hidden: bool = True

    def __post_init__(self):
        if self.kind not in ("icy", "mud"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "icy" and not self.speed_multiplier > 1:
            raise ValueError("icy regions need speed_multiplier > 1")
        if self.kind == "mud" and not 0 < self.speed_multiplier < 1:
            raise ValueError("mud regions need 0 < speed_multiplier < 1")

    @property
    def bounds(self):
        (cx, cy), (w, h) = self.center, self.half_extents
        return (cx - w, cy - h, cx + w, cy + h)

    def contains(self, p):
        x0, y0, x1, y1 = self.bounds
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


@dataclass(frozen=True)
class MapWorld:
    seed: int
    obstacles: tuple[Obstacle, ...]
    start: tuple[float, float]
    goal: tuple[float, float]
    high_cost_regions: tuple[HighCostRegion, ...] = field(default=())

    @cached_property
    def obstacle_bounds(self):
        """(n, 4) array of ``xmin, ymin, xmax, ymax`` rows."""
        if not self.obstacles:
            return np.zeros((0, 4))
        return np.array([o.bounds for o in self.obstacles], dtype=float)

    @cached_property
    def region_table(self):
        """(r, 7) array: bounds, speed multiplier, cost rate, hidden flag."""
        if not self.high_cost_regions:
            return np.zeros((0, 7))
        return np.array(
            [(*r.bounds, r.speed_multiplier, r.region_cost_rate, float(r.hidden))
             for r in self.high_cost_regions],
            dtype=float,
        )

    def with_regions(self, regions):
        return replace(self, high_cost_regions=tuple(regions))

    def to_dict(self):
        return {
            "version": MAP_FORMAT_VERSION,
            "seed": self.seed,
            "obstacles": [{"center": list(o.center), "half_extents": list(o.half_extents)}
                          for o in self.obstacles],
            "regions": [
                {"center": list(r.center), "half_extents": list(r.half_extents),
                 "kind": r.kind, "speed_multiplier": r.speed_multiplier,
                 "region_cost_rate": r.region_cost_rate, "hidden": r.hidden}
                for r in self.high_cost_regions
            ],
            "start": list(self.start),
            "goal": list(self.goal),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != MAP_FORMAT_VERSION:
            raise ValueError(f"unsupported map format version {doc.get('version')!r}")
        return cls(
            seed=int(doc["seed"]),
            obstacles=tuple(Obstacle(tuple(o["center"]), tuple(o["half_extents"]))
                            for o in doc["obstacles"]),
            start=tuple(doc["start"]),
            goal=tuple(doc["goal"]),
            high_cost_regions=tuple(
                HighCostRegion(tuple(r["center"]), tuple(r["half_extents"]), r["kind"],
                               r["speed_multiplier"], r["region_cost_rate"], r["hidden"])
                for r in doc["regions"]
            ),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _rect_distance(points, bounds):
    """Euclidean distance from each point to each rectangle (0 inside).

    points: (..., 2), bounds: (n, 4) -> (..., n)
    """
    p = np.asarray(points, dtype=float)[..., None, :]
    dx = np.maximum(np.maximum(bounds[:, 0] - p[..., 0], 0.0), p[..., 0] - bounds[:, 2])
    dy = np.maximum(np.maximum(bounds[:, 1] - p[..., 1], 0.0), p[..., 1] - bounds[:, 3])
    return np.hypot(dx, dy)


def clearance(world, points):
    """Distance from each point to the nearest obstacle or map edge, minus the footprint."""
    p = np.asarray(points, dtype=float)
    walls = np.minimum(np.minimum(p[..., 0], 1.0 - p[..., 0]),
                       np.minimum(p[..., 1], 1.0 - p[..., 1]))
    if len(world.obstacles):
        nearest = _rect_distance(p, world.obstacle_bounds).min(axis=-1)
        walls = np.minimum(walls, nearest)
    return walls - FOOTPRINT_RADIUS


def in_collision(world, points):
    """True where the footprint overlaps an obstacle or the center leaves the map."""
    p = np.asarray(points, dtype=float)
    outside = (p[..., 0] < 0) | (p[..., 0] > 1) | (p[..., 1] < 0) | (p[..., 1] > 1)
    if not len(world.obstacles):
        return outside
    return outside | (_rect_distance(p, world.obstacle_bounds).min(axis=-1) < FOOTPRINT_RADIUS)


def segment_hits_boxes(a, b, bounds):
    """Per-box flag: does segment a-b pass through the open interior of the box?"""
    bounds = np.asarray(bounds, dtype=float)
    if bounds.size == 0:
        return np.zeros(0, dtype=bool)
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    t_lo = np.full(len(bounds), -np.inf)
    t_hi = np.full(len(bounds), np.inf)
    hit = np.ones(len(bounds), dtype=bool)
    for axis in (0, 1):
        lo, hi = bounds[:, axis], bounds[:, axis + 2]
        if d[axis] == 0.0:
            hit &= (lo < a[axis]) & (a[axis] < hi)
        else:
            t1 = (lo - a[axis]) / d[axis]
            t2 = (hi - a[axis]) / d[axis]
            t_lo = np.maximum(t_lo, np.minimum(t1, t2))
            t_hi = np.minimum(t_hi, np.maximum(t1, t2))
    return hit & (t_lo < t_hi) & (t_hi > 0.0) & (t_lo < 1.0)


def line_of_sight(world, a, b, inflation=0.0):
    """True iff segment a-b crosses no obstacle interior (optionally inflated)."""
    a = check_point(a, "a")
    b = check_point(b, "b")
    if not len(world.obstacles):
        return True
    bounds = world.obstacle_bounds
    if inflation:
        bounds = bounds + np.array([-inflation, -inflation, inflation, inflation])
    return not segment_hits_boxes(a, b, bounds).any()


def first_collision(traj, world):
    """Index of the first trajectory state whose footprint collides, or None."""
    states = traj.states if hasattr(traj, "states") else np.asarray(traj)
    if len(states) == 0:
        raise ValueError("trajectory is empty")
    hits = np.flatnonzero(in_collision(world, states[:, :2]))
    return int(hits[0]) if hits.size else None


def region_at(world, p):
    """The high-cost region containing p (closed boundary), or None."""
    for region in world.high_cost_regions:
        if region.contains(p):
            return region
    return None


def _free_point(world, rng, margin):
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        p = rng.uniform(0.0, 1.0, size=2)
        if clearance(world, p) + FOOTPRINT_RADIUS >= margin:
            return float(p[0]), float(p[1])
    return None


def generate_map(seed, n_obstacles=50):
    """Scatter ``n_obstacles`` random rectangles and pick a far-apart start and goal.

    The result is a pure function of ``seed``.
    """
    n_obstacles = check_nonnegative_int(n_obstacles, "n_obstacles")
    rng = np.random.default_rng(seed)
    lo, hi = HALF_EXTENT_RANGE
    half = rng.uniform(lo, hi, size=(n_obstacles, 2))
    centers = rng.uniform(half, 1.0 - half)
    obstacles = tuple(Obstacle((float(c[0]), float(c[1])), (float(h[0]), float(h[1])))
                      for c, h in zip(centers, half))
    probe = MapWorld(seed=seed, obstacles=obstacles, start=(0.0, 0.0), goal=(0.0, 0.0))
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        start = _free_point(probe, rng, ENDPOINT_CLEARANCE)
        goal = _free_point(probe, rng, ENDPOINT_CLEARANCE)
        if start is None or goal is None:
            break
        if math.dist(start, goal) >= MIN_START_GOAL_SEPARATION:
            return replace(probe, start=start, goal=goal)
    raise MapGenerationError(f"could not place start/goal in free space for seed {seed}")
