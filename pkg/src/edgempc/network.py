"""Edge-server population: placement, links, availability, queueing delay and responses."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_fraction, check_nonnegative_int, check_rng
from .cost import CostContext
from .geometry import clearance, line_of_sight
from .mpc import best_candidate, sample_indices, stream
from .priors import uniform_pmf

REPLAN_BUDGET_MS = 10.0
SERVER_CAPACITIES = (5, 10, 20, 40)
DEPLOYMENT_FORMAT_VERSION = 1
# stream labels under an episode seed; label 0 is the agent's own sampler
_AVAIL, _LINK, _SAMPLE = 1, 2, 3


@dataclass(frozen=True)
class LinkProfile:
    """Retransmission ladder: latency of each attempt and its success chance."""

    name: str
    latencies_ms: tuple
    success_probs: tuple

    def __post_init__(self):
        if len(self.latencies_ms) != len(self.success_probs) or not self.latencies_ms:
            raise ValueError("need one success probability per attempt")
        for p in self.success_probs:
            check_fraction(p, "success probability")

    @property
    def delivery_prob(self):
        return 1.0 - math.prod(1.0 - p for p in self.success_probs)


PROFILE_A = LinkProfile("A", (2.0, 6.0, 9.0, 11.0), (0.99, 0.9, 0.9, 0.9))
PROFILE_B = LinkProfile("B", (2.0, 6.0, 9.0, 11.0), (0.9, 0.7, 0.7, 0.7))
IDEAL_LINK = LinkProfile("ideal", (0.0,), (1.0,))
PROFILES = {p.name: p for p in (PROFILE_A, PROFILE_B, IDEAL_LINK)}


@dataclass(frozen=True)
class DeltaSetting:
    profile: LinkProfile
    coverage_radius: float
    requires_los: bool = True


#: E2E latency settings 0..4; setting 0 is a perfect link reaching the whole map
DELTA_SETTINGS = {
    0: DeltaSetting(IDEAL_LINK, math.inf, requires_los=False),
    1: DeltaSetting(PROFILE_A, 0.4),
    2: DeltaSetting(PROFILE_B, 0.2),
    3: DeltaSetting(PROFILE_B, 0.4),
    4: DeltaSetting(PROFILE_A, 0.2),
}


@dataclass(frozen=True)
class LinkOutcome:
    delivered: bool
    total_latency: float
    attempts: int


def _first_success(u, probs):
    ok = u < np.asarray(probs)
    delivered = ok.any(axis=-1)
    attempt = np.where(delivered, ok.argmax(axis=-1), len(probs) - 1)
    return delivered, attempt


def sample_link(profile, rng):
    """One pass down the ladder; latency is the ladder value of the successful attempt."""
    u = rng.random(len(profile.success_probs))
    return link_from_uniforms(profile, u)


def link_from_uniforms(profile, u):
    delivered, attempt = _first_success(np.asarray(u), profile.success_probs)
    latency = profile.latencies_ms[int(attempt)] if delivered else math.inf
    return LinkOutcome(bool(delivered), latency, int(attempt) + 1)


def sample_links(profile, n, rng, chunk=1_000_000):
    """Vectorized ladder draws: (delivered, latency_ms, attempts) arrays of length n."""
    n = check_nonnegative_int(n, "n")
    lat = np.asarray(profile.latencies_ms)
    delivered = np.empty(n, dtype=bool)
    latency = np.empty(n)
    attempts = np.empty(n, dtype=np.int8)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        ok, att = _first_success(rng.random((hi - lo, len(lat))), profile.success_probs)
        delivered[lo:hi] = ok
        latency[lo:hi] = np.where(ok, lat[att], np.inf)
        attempts[lo:hi] = att + 1
    return delivered, latency, attempts


def effective_budget(c, total_latency, replan_budget=REPLAN_BUDGET_MS, delivered=True):
    """Samples an edge node can still evaluate once ``total_latency`` of the period is gone."""
    c = check_nonnegative_int(c, "c")
    if not delivered or not total_latency < replan_budget:
        return 0
    return math.floor(c * (replan_budget - total_latency) / replan_budget)


@dataclass(frozen=True)
class Availability:
    """``always``, ``bernoulli`` (up with probability p each step) or ``delay_trace``."""

    kind: str = "always"
    p: float = 1.0
    trace: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("always", "bernoulli", "delay_trace"):
            raise ValueError(f"unknown availability model {self.kind!r}")
        check_fraction(self.p, "p")
        if self.kind == "delay_trace" and not self.trace:
            raise ValueError("delay_trace availability needs a trace")

    def queue_delay(self, step):
        if self.kind != "delay_trace":
            return 0.0
        return float(self.trace[min(step, len(self.trace) - 1)])


ALWAYS = Availability()


@dataclass(frozen=True, eq=False)
class EdgeNode:
    node_id: int
    position: tuple
    capacity: int
    coverage_radius: float = 0.4
    link_profile: LinkProfile = PROFILE_A
    availability: Availability = ALWAYS
    requires_los: bool = True
    prior_store: object = None

    def __post_init__(self):
        check_nonnegative_int(self.capacity, "capacity")
        if not self.coverage_radius > 0:
            raise ValueError("coverage_radius must be positive")


def connected(node, s, world):
    """In range and, unless the link ignores it, in line of sight."""
    p = (s.x, s.y) if hasattr(s, "x") else tuple(np.asarray(s, dtype=float)[:2])
    if math.dist(node.position, p) > node.coverage_radius:
        return False
    return not node.requires_los or line_of_sight(world, node.position, p)


def voronoi_cell(positions, p):
    """Index of the site whose Voronoi cell holds ``p`` (ties go to the smaller index)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(positions) == 0:
        return None
    return int(np.hypot(*(positions - np.asarray(p, dtype=float)[:2]).T).argmin())


def deploy_servers(world, n, capacities=SERVER_CAPACITIES, seed=0, delta=1, availability=ALWAYS):
    """``n`` nodes placed uniformly in free space with capacities drawn from ``capacities``."""
    n = check_nonnegative_int(n, "n")
    rng = check_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    setting = DELTA_SETTINGS[delta]
    nodes = []
    while len(nodes) < n:
        p = rng.uniform(0.0, 1.0, 2)
        if clearance(world, p[None])[0] < 0.0:
            continue
        nodes.append(EdgeNode(len(nodes), (float(p[0]), float(p[1])),
                              int(rng.choice(capacities)), setting.coverage_radius,
                              setting.profile, availability, setting.requires_los))
    return nodes


def deployment_to_dict(nodes, seed):
    return {
        "version": DEPLOYMENT_FORMAT_VERSION,
        "seed": seed,
        "N": len(nodes),
        "positions": [list(nd.position) for nd in nodes],
        "capacities": [nd.capacity for nd in nodes],
        "profile": sorted({nd.link_profile.name for nd in nodes}),
    }


def save_deployment(nodes, seed, path):
    Path(path).write_text(json.dumps(deployment_to_dict(nodes, seed), sort_keys=True) + "\n")


def mm1_sojourn_times(lam, mu, n_jobs, rng):
    """Arrival times and FIFO sojourn times (s) of ``n_jobs`` M/M/1 customers.

    Departures follow D_n = max(A_n, D_{n-1}) + S_n, unrolled as a running max.
    """
    if lam <= 0 or n_jobs == 0:
        return np.zeros(0), np.zeros(0)
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n_jobs))
    service = rng.exponential(1.0 / mu, n_jobs)
    work = np.cumsum(service)
    departures = work + np.maximum.accumulate(arrivals - (work - service))
    return arrivals, departures - arrivals


def mm1_delay_trace(lam, mu, sim_seconds=20.0, keep_seconds=10.0, step_ms=10.0, seed=0):
    """Per-step delay (ms) seen by a job arriving in that step; the first ``keep_seconds``."""
    if lam < 0 or mu <= 0:
        raise ValueError("need lam >= 0 and mu > 0")
    rng = check_rng(seed)
    n_steps = int(round(keep_seconds * 1000.0 / step_ms))
    baseline = 1000.0 / mu
    if lam == 0:
        return np.full(n_steps, baseline)
    # over-draw arrivals so the simulated window is covered, then cut at sim_seconds
    n_jobs = int(lam * sim_seconds + 10 * math.sqrt(lam * sim_seconds) + 10)
    arrivals, sojourn = mm1_sojourn_times(lam, mu, n_jobs, rng)
    keep = arrivals < sim_seconds
    arrivals, sojourn = arrivals[keep], sojourn[keep] * 1000.0
    bins = np.floor(arrivals * 1000.0 / step_ms).astype(np.int64)
    inside = bins < n_steps
    sums = np.bincount(bins[inside], sojourn[inside], minlength=n_steps)
    counts = np.bincount(bins[inside], minlength=n_steps)
    trace = np.empty(n_steps)
    last = baseline
    for k in range(n_steps):
        if counts[k]:
            last = sums[k] / counts[k]
        trace[k] = last
    return trace


def write_delay_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "ms"))
        for k, v in enumerate(trace):
            writer.writerow((k, repr(float(v))))


@dataclass(frozen=True)
class ResponseRecord:
    """Audit row for one connected node at one step."""

    step: int
    node_id: int
    available: bool
    delivered: bool
    link_latency: float
    queue_delay: float
    total_latency: float
    budget: int
    n_samples: int
    picked: int = -1


def respond(node, s, ctx, prior, window, step, rngs, evaluator, clear_sight, link=None,
            available=None):
    """One node's answer for this step, with its audit record.

    ``rngs`` holds the node's (availability, link, sampling) generators; the
    availability and link draws may be passed precomputed so every node draws
    on every step whether or not it is in range.
    """
    avail_rng, link_rng, sample_rng = rngs
    if available is None:
        available = _draw_available(node, avail_rng.random())
    if link is None:
        link = sample_link(node.link_profile, link_rng)
    queue = node.availability.queue_delay(step)
    total = link.total_latency + queue if link.delivered else math.inf
    budget = effective_budget(node.capacity, total, delivered=link.delivered) if available else 0
    pick = None
    if budget > 0:
        pmf = _node_pmf(node, prior, s, evaluator.library)
        idx = sample_indices(pmf, budget, sample_rng)
        pick = best_candidate(s, idx, evaluator.library, evaluator.world, window, ctx,
                              clear_sight=clear_sight, evaluator=evaluator,
                              source=f"edge{node.node_id}")
    record = ResponseRecord(step, node.node_id, bool(available), link.delivered,
                            link.total_latency, queue, total, budget, budget,
                            -1 if pick is None else pick.primitive_index)
    return pick, record


def _draw_available(node, u):
    if node.availability.kind == "bernoulli":
        return u < node.availability.p
    return True


def _node_pmf(node, prior, s, library):
    if prior is None:
        return uniform_pmf(len(library))
    store = node.prior_store if node.prior_store is not None else prior.store
    return store.pmf(s, beta=prior.beta)


@dataclass
class EdgeSession:
    """Per-episode node state: each node owns its availability, link and sampling streams."""

    network: EdgeNetwork
    seed: int
    rngs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ctx = CostContext.edge(self.network.world)
        self.rngs = {nd.node_id: tuple(stream(self.seed, label, nd.node_id)
                                       for label in (_AVAIL, _LINK, _SAMPLE))
                     for nd in self.network.nodes}

    def respond_all(self, s, step, window, evaluator, clear_sight, prior=None):
        responses, records = [], []
        for node in self.network.nodes:
            avail_rng, link_rng, _ = rngs = self.rngs[node.node_id]
            # drawn unconditionally so a node's draws stay aligned with the step index
            available = _draw_available(node, avail_rng.random())
            link = sample_link(node.link_profile, link_rng)
            if not connected(node, s, self.network.world):
                continue
            pick, rec = respond(node, s, self.ctx, prior, window, step, rngs, evaluator,
                                clear_sight, link=link, available=available)
            records.append(rec)
            if pick is not None:
                responses.append(pick)
        return responses, records


@dataclass(frozen=True, eq=False)
class EdgeNetwork:
    world: object
    nodes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def session(self, seed):
        return EdgeSession(self, seed)

    @property
    def positions(self):
        return np.array([nd.position for nd in self.nodes]).reshape(-1, 2)
