"""Closed-form sampling and queueing results, with Monte Carlo cross-checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_fraction, check_positive_int, check_rng


class UnstableQueueError(ValueError):
    pass


@dataclass(frozen=True)
class CostRange:
    c_min: float = 0.0
    c_max: float = 1.0

    def __post_init__(self):
        if self.c_min > self.c_max:
            raise ValueError("c_min must not exceed c_max")


@dataclass(frozen=True)
class UniformCost:
    """Candidate costs i.i.d. uniform on the range."""

    r: CostRange = CostRange()

    def sample(self, rng, size):
        return self.r.c_min + (self.r.c_max - self.r.c_min) * rng.random(size)


@dataclass(frozen=True)
class CorridorCost:
    """A share ``gamma`` of candidates costs c_min, the rest c_max."""

    gamma: float
    r: CostRange = CostRange()

    def __post_init__(self):
        check_fraction(self.gamma, "gamma")

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.gamma, self.r.c_min, self.r.c_max)


def expected_min_uniform(m, r=CostRange()):
    """Mean of the cheapest of ``m`` uniform candidates.

    >>> expected_min_uniform(9)
    0.1
    """
    m = check_positive_int(m, "M")
    return (r.c_max - r.c_min) / (m + 1) + r.c_min


def expected_single_corridor(gamma, r=CostRange()):
    gamma = check_fraction(gamma, "gamma")
    return (1.0 - gamma) * r.c_max + gamma * r.c_min


def expected_min_corridor(m, gamma, r=CostRange()):
    m = check_positive_int(m, "M")
    gamma = check_fraction(gamma, "gamma")
    miss = (1.0 - gamma) ** m
    return miss * r.c_max + (1.0 - miss) * r.c_min


@dataclass(frozen=True)
class QueueParams:
    lam: float
    mu: float
    var_service: float | None = None

    def __post_init__(self):
        if not self.mu > 0 or self.lam < 0:
            raise ValueError("need mu > 0 and lam >= 0")

    @property
    def rho(self):
        return self.lam / self.mu

    @property
    def variance(self):
        return 1.0 / self.mu ** 2 if self.var_service is None else self.var_service


@dataclass(frozen=True)
class QueueMetrics:
    rho: float
    L: float
    W: float  # seconds


def mg1_metrics(q):
    """Pollaczek-Khinchine mean number in system and, via Little's law, mean sojourn."""
    lam, mu, var = q.lam, q.mu, q.variance
    rho = q.rho
    if rho >= 1.0:
        raise UnstableQueueError(f"utilization {rho:.3g} >= 1: the queue is unstable")
    if lam == 0:
        return QueueMetrics(0.0, 0.0, 1.0 / mu)
    L = rho + (rho ** 2 + lam ** 2 * var) / (2.0 * (1.0 - rho))
    W = (rho + lam * mu * var) / (2.0 * (mu - lam)) + 1.0 / mu
    return QueueMetrics(rho, L, W)


def mm1_metrics(q):
    lam, mu = q.lam, q.mu
    if lam >= mu:
        raise UnstableQueueError(f"lam={lam} >= mu={mu}: the queue is unstable")
    rho = lam / mu
    return QueueMetrics(rho, rho / (1.0 - rho), 1.0 / (mu - lam))


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int

    def agrees(self, value, n_sigma=3.0):
        # a degenerate distribution has zero spread; allow float round-off only
        return abs(self.mean - value) <= max(n_sigma * self.stderr, 1e-12 * max(1.0, abs(value)))


def monte_carlo_min(dist, m, trials, seed=0, chunk_draws=4_000_000):
    """Seeded mean (and standard error) of the minimum of ``m`` draws from ``dist``."""
    m = check_positive_int(m, "M")
    trials = check_positive_int(trials, "trials")
    rng = check_rng(seed)
    rows = max(1, chunk_draws // m)
    total = 0.0
    total_sq = 0.0
    for lo in range(0, trials, rows):
        n = min(rows, trials - lo)
        mins = dist.sample(rng, (n, m)).min(axis=1)
        total += mins.sum()
        total_sq += (mins ** 2).sum()
    mean = total / trials
    var = max(total_sq / trials - mean ** 2, 0.0) * trials / max(trials - 1, 1)
    return MonteCarloEstimate(mean, math.sqrt(var / trials), trials)
