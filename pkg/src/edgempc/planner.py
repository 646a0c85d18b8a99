"""RRT* reference paths and the receding window the local planner tracks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_rng
from .geometry import FOOTPRINT_RADIUS, clearance
from .vehicle import NOMINAL_SPEED

#: Extra clearance the planner keeps beyond the footprint.
PLANNING_MARGIN = 0.02


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ReferencePath:
    waypoints: np.ndarray  # (n, 2)

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) == 0:
            raise ValueError("waypoints must be a non-empty (n, 2) array")
        object.__setattr__(self, "waypoints", wp)

    @property
    def arclength(self):
        seg = np.hypot(*np.diff(self.waypoints, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self):
        return float(self.arclength[-1])

    def point_at(self, s):
        """Point(s) at arclength ``s`` (clamped to the path)."""
        arc = self.arclength
        if len(arc) == 1:
            return np.broadcast_to(self.waypoints[0], np.shape(s) + (2,)).copy()
        return np.stack([np.interp(s, arc, self.waypoints[:, 0]),
                         np.interp(s, arc, self.waypoints[:, 1])], axis=-1)

    def project(self, p):
        """Arclength of the nearest path point to p; ties go to the larger arclength."""
        p = np.asarray(p, dtype=float)[:2]
        wp = self.waypoints
        if len(wp) == 1:
            return 0.0
        a, b = wp[:-1], wp[1:]
        d = b - a
        seg_len2 = (d ** 2).sum(axis=1)
        t = np.clip(((p - a) * d).sum(axis=1) / seg_len2, 0.0, 1.0)
        foot = a + t[:, None] * d
        dist = np.hypot(*(foot - p).T)
        arc = self.arclength
        s_foot = arc[:-1] + t * np.sqrt(seg_len2)
        best = np.flatnonzero(dist <= dist.min() + 1e-12)
        return float(s_foot[best].max())

    def to_dict(self):
        return {"waypoints": self.waypoints.tolist()}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls(np.array(json.loads(Path(path).read_text())["waypoints"]))


def segments_blocked(a, b, bounds):
    """(m,) flags: segment a[i]-b[i] crosses the open interior of any box."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if len(bounds) == 0:
        return np.zeros(len(a), dtype=bool)
    d = (b - a)[:, None, :]
    lo = bounds[None, :, :2]
    hi = bounds[None, :, 2:]
    origin = a[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / d
        t2 = (hi - origin) / d
    parallel = d == 0.0
    inside = (lo < origin) & (origin < hi)
    t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    t_lo = t_near.max(axis=2)
    t_hi = t_far.min(axis=2)
    return ((t_lo < t_hi) & (t_hi > 0.0) & (t_lo < 1.0)).any(axis=1)


def _shortcut(points, bounds):
    """Greedy line-of-sight pruning of a waypoint chain."""
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        ahead = points[i + 1:]
        clear = ~segments_blocked(np.repeat(points[i][None], len(ahead), axis=0), ahead, bounds)
        j = i + 1 + int(np.flatnonzero(clear).max()) if clear.any() else i + 1
        out.append(points[j])
        i = j
    return np.array(out)


def _densify(points, spacing):
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        n = max(1, math.ceil(math.dist(a, b) / spacing))
        for k in range(1, n + 1):
            out.append(a + (b - a) * k / n)
    return np.array(out)


def plan_reference(world, max_iters=5000, step_size=0.03, rewire_radius=0.1,
                   goal_bias=0.05, seed=0):
    """RRT* from start to goal, shortcut and resampled at ``step_size`` spacing."""
    rng = check_rng(seed)
    inflate = FOOTPRINT_RADIUS + PLANNING_MARGIN
    bounds = world.obstacle_bounds + np.array([-inflate, -inflate, inflate, inflate])
    start = np.asarray(world.start, dtype=float)
    goal = np.asarray(world.goal, dtype=float)

    def free(p):
        return clearance(world, p) + FOOTPRINT_RADIUS >= inflate

    if not free(start) or not free(goal):
        raise PlanningError(f"start or goal is not in free space (map seed {world.seed})")

    nodes = np.empty((max_iters + 1, 2))
    parent = np.full(max_iters + 1, -1)
    cost = np.zeros(max_iters + 1)
    children = [[]]
    nodes[0] = start
    n = 1
    goal_parent, goal_cost = -1, np.inf

    for _ in range(max_iters):
        target = goal if rng.random() < goal_bias else rng.uniform(0.0, 1.0, 2)
        dist = np.hypot(*(nodes[:n] - target).T)
        nearest = int(dist.argmin())
        step = target - nodes[nearest]
        length = float(np.hypot(*step))
        if length == 0.0:
            continue
        new = nodes[nearest] + step * min(1.0, step_size / length)
        if not free(new):
            continue
        d_new = np.hypot(*(nodes[:n] - new).T)
        near = np.flatnonzero(d_new <= rewire_radius)
        if near.size == 0:
            near = np.array([nearest])
        clear = ~segments_blocked(nodes[near], np.repeat(new[None], near.size, axis=0), bounds)
        if not clear.any():
            continue
        near, d_near = near[clear], d_new[near[clear]]
        via = cost[near] + d_near
        best = int(near[via.argmin()])
        nodes[n] = new
        parent[n] = best
        cost[n] = float(via.min())
        children.append([])
        children[best].append(n)
        new_id = n
        n += 1

        improved = cost[new_id] + d_near < cost[near] - 1e-12
        for k in near[improved]:
            k = int(k)
            if k == best:
                continue
            children[parent[k]].remove(k)
            parent[k] = new_id
            children[new_id].append(k)
            delta = cost[new_id] + float(np.hypot(*(nodes[k] - new))) - cost[k]
            stack = [k]
            while stack:
                j = stack.pop()
                cost[j] += delta
                stack.extend(children[j])

        # the goal itself is attached to whichever node reaches it cheapest
        d_goal = np.hypot(*(nodes[:n] - goal).T)
        cand = np.flatnonzero(d_goal <= step_size)
        if cand.size:
            clear = ~segments_blocked(nodes[cand], np.repeat(goal[None], cand.size, axis=0), bounds)
            if clear.any():
                total = cost[cand[clear]] + d_goal[cand[clear]]
                if total.min() < goal_cost:
                    goal_cost = float(total.min())
                    goal_parent = int(cand[clear][total.argmin()])

    if goal_parent < 0:
        raise PlanningError(f"RRT* found no path on map seed {world.seed} "
                            f"within {max_iters} iterations (planner seed {seed})")
    chain = [goal]
    k = goal_parent
    while k >= 0:
        chain.append(nodes[k])
        k = parent[k]
    chain = np.array(chain[::-1])
    pts = _densify(_shortcut(chain, bounds), step_size)
    keep = np.concatenate([[True], np.hypot(*np.diff(pts, axis=0).T) > 0])
    return ReferencePath(pts[keep])


class RRTStarPlanner(BaseEstimator):
    """Estimator-style wrapper: ``fit(world)`` plans and stores ``path_``."""

    def __init__(self, max_iters=5000, step_size=0.03, rewire_radius=0.1, goal_bias=0.05,
                 random_state=0):
        self.max_iters = max_iters
        self.step_size = step_size
        self.rewire_radius = rewire_radius
        self.goal_bias = goal_bias
        self.random_state = random_state

    def fit(self, world, y=None):
        self.path_ = plan_reference(world, self.max_iters, self.step_size, self.rewire_radius,
                                    self.goal_bias, self.random_state)
        return self

    def transform(self, states):
        """Reference windows for each state."""
        check_is_fitted(self, "path_")
        return [reference_window(self.path_, s) for s in np.atleast_2d(states)]


def reference_window(path, s, horizon=10, v_nominal=NOMINAL_SPEED):
    """Sub-polyline from the nearest path point, ``horizon * v_nominal`` long."""
    xy = (s.x, s.y) if hasattr(s, "x") else np.asarray(s, dtype=float)[:2]
    arc = path.arclength
    s0 = path.project(xy)
    s1 = min(s0 + horizon * v_nominal, float(arc[-1]))
    inner = np.flatnonzero((arc > s0) & (arc < s1))
    pts = [path.point_at(s0), *path.waypoints[inner], path.point_at(s1)]
    if s1 <= s0:
        pts = pts[:1]
    return np.array(pts)


def resample_polyline(polyline, n):
    """``n`` points evenly spaced by arclength along a polyline."""
    polyline = np.asarray(polyline, dtype=float)
    if len(polyline) == 1:
        return np.repeat(polyline, n, axis=0)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(polyline, axis=0).T))])
    s = np.linspace(0.0, arc[-1], n)
    return np.stack([np.interp(s, arc, polyline[:, 0]), np.interp(s, arc, polyline[:, 1])], axis=1)
