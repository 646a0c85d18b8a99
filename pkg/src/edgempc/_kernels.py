"""Compiled inner loop for rolling out and featurizing a batch of primitives.

Mirrors ``vehicle.rollout`` and ``cost.compute_features``; the tests hold the
two paths equal.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _region_index(x, y, regions):
    for r in range(regions.shape[0]):
        if regions[r, 0] <= x <= regions[r, 2] and regions[r, 1] <= y <= regions[r, 3]:
            return r
    return -1


@njit(cache=True)
def _clearance(x, y, obstacles, radius):
    best = min(min(x, 1.0 - x), min(y, 1.0 - y))
    hit = x < 0.0 or x > 1.0 or y < 0.0 or y > 1.0
    for k in range(obstacles.shape[0]):
        dx = max(max(obstacles[k, 0] - x, 0.0), x - obstacles[k, 2])
        dy = max(max(obstacles[k, 1] - y, 0.0), y - obstacles[k, 3])
        d = math.hypot(dx, dy)
        if d < radius:
            hit = True
        if d < best:
            best = d
    return best - radius, hit


@njit(cache=True)
def _frechet(px, py, q):
    n = px.shape[0]
    m = q.shape[0]
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = math.hypot(px[i] - q[j, 0], py[i] - q[j, 1])
            if i == 0 and j == 0:
                ca[i, j] = d
            elif i == 0:
                ca[i, j] = max(ca[i, j - 1], d)
            elif j == 0:
                ca[i, j] = max(ca[i - 1, j], d)
            else:
                ca[i, j] = max(min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]), d)
    return ca[n - 1, m - 1]


@njit(cache=True)
def evaluate_batch(x0, y0, th0, controls, obstacles, regions, window, gx, gy,
                   wheelbase, radius, d_safe, goal_tol):
    """Roll out M primitives and compute their context-free features.

    The goal is absorbing: a rollout within ``goal_tol`` of it stops moving, and
    steering on the steps it stands still is not charged.

    Returns states (M, H+1, 3), base features (M, 5) in the order
    frechet, steering, goal distance, proximity, collision probability,
    per-region step counts (M, R) and collision flags (M,).
    """
    n_cand, horizon = controls.shape[0], controls.shape[1]
    n_reg = regions.shape[0]
    states = np.empty((n_cand, horizon + 1, 3))
    feats = np.zeros((n_cand, 5))
    region_steps = np.zeros((n_cand, n_reg))
    collided = np.zeros(n_cand, dtype=np.bool_)
    for m in range(n_cand):
        x, y, th = x0, y0, th0
        states[m, 0, 0] = x
        states[m, 0, 1] = y
        states[m, 0, 2] = th
        steer_sum = 0.0
        arrived = False
        for t in range(horizon):
            if not arrived:
                arrived = math.hypot(x - gx, y - gy) < goal_tol
            if arrived:
                states[m, t + 1, 0] = x
                states[m, t + 1, 1] = y
                states[m, t + 1, 2] = th
                continue
            mult = 1.0
            r = _region_index(x, y, regions)
            if r >= 0:
                mult = regions[r, 4]
            ds = controls[m, t, 0] * mult
            steer = controls[m, t, 1]
            steer_sum += abs(steer)
            x = x + ds * math.cos(th)
            y = y + ds * math.sin(th)
            th = th + ds / wheelbase * math.tan(steer)
            th = (th + math.pi) % (2.0 * math.pi) - math.pi
            if th == -math.pi:
                th = math.pi
            states[m, t + 1, 0] = x
            states[m, t + 1, 1] = y
            states[m, t + 1, 2] = th
        prox = 0.0
        near = 0
        hit_any = False
        for t in range(horizon + 1):
            c, hit = _clearance(states[m, t, 0], states[m, t, 1], obstacles, radius)
            if hit:
                hit_any = True
            if t >= 1:
                prox += max(0.0, d_safe - c) / d_safe
                if c < 0.5 * d_safe:
                    near += 1
                r = _region_index(states[m, t, 0], states[m, t, 1], regions)
                if r >= 0:
                    region_steps[m, r] += 1.0
        feats[m, 0] = _frechet(states[m, :, 0], states[m, :, 1], window)
        feats[m, 1] = steer_sum
        feats[m, 2] = math.hypot(states[m, horizon, 0] - gx, states[m, horizon, 1] - gy)
        feats[m, 3] = prox
        feats[m, 4] = 1.0 if hit_any else near / horizon
        collided[m] = hit_any
    return states, feats, region_steps, collided
