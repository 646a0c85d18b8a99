"""Kinematic bicycle dynamics and the shared motion-primitive library."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import region_at

LIBRARY_FORMAT_VERSION = 1

#: Short wheelbase (turning radius ~0.028 at full lock) keeps corridors navigable.
WHEELBASE = 0.01
DT = 1.0
MAX_STEERING = 0.34
SPEED_PROFILES = {"normal": 0.01, "high": 0.015, "low": 0.005}
NOMINAL_SPEED = SPEED_PROFILES["normal"]
#: Distance to the goal that ends an episode; predicted motion stops there too.
GOAL_TOLERANCE = 0.03


class LibraryGenerationError(ValueError):
    pass


def wrap_angle(theta):
    """Map angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))

    @property
    def position(self):
        return (self.x, self.y)

    def as_array(self):
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Control:
    speed: float
    steering: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if abs(self.steering) > MAX_STEERING + 1e-12:
            raise ValueError(f"|steering| exceeds {MAX_STEERING}")


@dataclass(frozen=True, eq=False)
class MotionPrimitive:
    index: int
    controls: np.ndarray  # (H, 2): speed, steering

    def __len__(self):
        return len(self.controls)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (H + 1, 3)
    controls: np.ndarray  # (H, 2)
    primitive_index: int

    @property
    def positions(self):
        return self.states[:, :2]


def step_dynamics(s, u, speed_multiplier=1.0, wheelbase=WHEELBASE, dt=DT):
    """One explicit-Euler bicycle step; position advances along the pre-step heading."""
    x, y, theta = (s.x, s.y, s.theta) if isinstance(s, VehicleState) else s
    v, steer = (u.speed, u.steering) if isinstance(u, Control) else u
    ds = v * speed_multiplier * dt
    return VehicleState(
        x + ds * math.cos(theta),
        y + ds * math.sin(theta),
        theta + ds / wheelbase * math.tan(steer),
    )


@dataclass(frozen=True, eq=False)
class MotionPrimitiveLibrary:
    controls: np.ndarray  # (K, H, 2)
    params: dict
    seed: int

    def __len__(self):
        return len(self.controls)

    def __getitem__(self, index):
        return MotionPrimitive(int(index), self.controls[index])

    @property
    def horizon(self):
        return self.controls.shape[1]

    @property
    def speed_profile(self):
        return self.params["speed_profile"]

    def with_speed_profile(self, profile):
        """Same steering structure, speed rescaled to another profile."""
        scale = SPEED_PROFILES[profile] / SPEED_PROFILES[self.speed_profile]
        controls = self.controls.copy()
        controls[..., 0] *= scale
        return MotionPrimitiveLibrary(controls, {**self.params, "speed_profile": profile}, self.seed)

    def to_dict(self):
        return {
            "version": LIBRARY_FORMAT_VERSION,
            "params": self.params,
            "seed": self.seed,
            "K": len(self),
            "controls": self.controls.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != LIBRARY_FORMAT_VERSION:
            raise ValueError(f"unsupported library format version {doc.get('version')!r}")
        controls = np.array(doc["controls"], dtype=float)
        if len(controls) != doc["K"]:
            raise ValueError("library K does not match the controls table")
        return cls(controls, dict(doc["params"]), int(doc["seed"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, MotionPrimitiveLibrary):
            return NotImplemented
        return (self.params == other.params and self.seed == other.seed
                and np.array_equal(self.controls, other.controls))


def steering_fan(branches, fan_halfwidth):
    if branches == 1:
        return np.zeros(1)
    return np.linspace(-fan_halfwidth, fan_halfwidth, branches)


def generate_library(horizon=10, segments=2, branches=32, n_primitives=1000,
                     fan_halfwidth=MAX_STEERING, speed_profile="normal", seed=1):
    """Build K piecewise-constant steering sequences at a fixed speed.

    Each of the ``segments`` contiguous chunks of the horizon holds one steering
    angle from a ``branches``-wide fan. When the fan admits more combinations
    than ``n_primitives`` a seeded subset is kept.
    """
    if horizon < 1 or segments < 1 or branches < 1 or n_primitives < 1:
        raise LibraryGenerationError("horizon, segments, branches and K must be positive")
    if segments > horizon:
        raise LibraryGenerationError("cannot split the horizon into more segments than steps")
    if speed_profile not in SPEED_PROFILES:
        raise LibraryGenerationError(f"unknown speed profile {speed_profile!r}")
    if not 0 <= fan_halfwidth <= MAX_STEERING:
        raise LibraryGenerationError(f"fan half-width must lie in [0, {MAX_STEERING}]")
    n_combos = branches ** segments
    if n_combos < n_primitives:
        raise LibraryGenerationError(
            f"{branches} branches over {segments} segments give {n_combos} < K={n_primitives}")

    rng = np.random.default_rng(seed)
    if n_combos == n_primitives:
        combos = np.arange(n_combos)
    else:
        combos = np.sort(rng.choice(n_combos, size=n_primitives, replace=False))
    digits = (combos[:, None] // branches ** np.arange(segments)[None, :]) % branches
    fan = steering_fan(branches, fan_halfwidth)
    seg_of_step = np.concatenate([np.full(len(chunk), i) for i, chunk in
                                  enumerate(np.array_split(np.arange(horizon), segments))])
    controls = np.empty((n_primitives, horizon, 2))
    controls[..., 0] = SPEED_PROFILES[speed_profile]
    controls[..., 1] = fan[digits[:, seg_of_step]]
    params = {"H": horizon, "segments": segments, "branches": branches, "K": n_primitives,
              "fan_halfwidth": fan_halfwidth, "speed_profile": speed_profile}
    return MotionPrimitiveLibrary(controls, params, int(seed))


def rollout(s0, primitive, world=None, goal=None, goal_tolerance=GOAL_TOLERANCE):
    """Roll a primitive through the dynamics; regions scale speed at each step's start.

    With ``goal`` given, the goal is absorbing: once a predicted state is within
    ``goal_tolerance`` of it the remaining steps stay put.
    """
    state = s0 if isinstance(s0, VehicleState) else VehicleState(*s0)
    states = [state.as_array()]
    arrived = False
    for v, steer in primitive.controls:
        if goal is not None and not arrived:
            arrived = math.dist(state.position, goal) < goal_tolerance
        if not arrived:
            region = region_at(world, state.position) if world is not None else None
            mult = region.speed_multiplier if region is not None else 1.0
            state = step_dynamics(state, (v, steer), mult)
        states.append(state.as_array())
    return Trajectory(np.array(states), primitive.controls, primitive.index)
