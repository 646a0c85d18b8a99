"""Localized histories of winning primitives and the sampling PMFs built from them."""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fraction, check_positive_int, check_states

STORE_FORMAT_VERSION = 1
DEFAULT_PRECISION = 2


class IngestionWarning(UserWarning):
    pass


@dataclass(frozen=True, order=True)
class AnchorKey:
    qx: float
    qy: float


def _round_half_up(value, precision):
    quantum = Decimal(1).scaleb(-precision)
    return float(Decimal(float(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def map_state_to_anchor(s, precision=DEFAULT_PRECISION):
    """Drop the heading and round x, y half-up to ``precision`` decimals."""
    if precision not in (1, 2, 3, 4):
        raise ValueError(f"precision must be 1..4, got {precision!r}")
    x, y = (s.x, s.y) if hasattr(s, "x") else (s[0], s[1])
    return AnchorKey(_round_half_up(x, precision), _round_half_up(y, precision))


@dataclass
class AnchorRecord:
    key: AnchorKey
    counts: Counter = field(default_factory=Counter)

    @property
    def size(self):
        return sum(self.counts.values())

    @property
    def history(self):
        return sorted(self.counts.elements())

    def add(self, index, n=1):
        self.counts[int(index)] += n


def uniform_pmf(n_primitives):
    return np.full(n_primitives, 1.0 / n_primitives)


def smoothed_index_prob(record, j, n_primitives):
    """Add-one smoothed probability of index ``j`` given the record's history."""
    hits = record.counts.get(int(j), 0) if record is not None else 0
    size = record.size if record is not None else 0
    return (1 + hits) / (n_primitives + size)


def smoothed_pmf(record, n_primitives):
    counts = np.zeros(n_primitives)
    if record is not None:
        for j, c in record.counts.items():
            counts[j] = c
    return (1.0 + counts) / (n_primitives + counts.sum())


def empirical_pmf(record, n_primitives):
    """Relative frequencies of historical winners; undefined for an empty history."""
    if record is None or record.size == 0:
        raise ValueError("empirical PMF needs at least one historical sample")
    pmf = np.zeros(n_primitives)
    for j, c in record.counts.items():
        pmf[j] = c
    return pmf / record.size


def mixed_pmf(record, beta, n_primitives):
    """(1 - beta) * uniform + beta * empirical; plain uniform when there is no record."""
    beta = check_fraction(beta, "beta")
    if record is None or record.size == 0:
        return uniform_pmf(n_primitives)
    return (1.0 - beta) * uniform_pmf(n_primitives) + beta * empirical_pmf(record, n_primitives)


@dataclass(frozen=True)
class PriorSizeBound:
    """``miss1`` and ``miss2`` are the complements ``1 - delta``; they keep their
    precision where both deltas round to 1.0."""

    delta1: float
    delta2: float | None
    satisfied: bool
    miss1: float = math.nan
    miss2: float | None = None


def prior_size_bound(n_samples, frac_good, m, m_good):
    """Chance that ``n_samples`` draws beat the mean cost, without and with priors.

    ``delta1`` uses the share of better-than-average primitives in the whole
    library, ``delta2`` the share among ``m`` collected priors; the store is
    large enough when the latter share is at least the former.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    frac_good = check_fraction(frac_good, "frac_good")
    if not 0 <= m_good <= m:
        raise ValueError("need 0 <= m_good <= m")
    miss1 = (1.0 - frac_good) ** n_samples
    if m == 0:
        return PriorSizeBound(1.0 - miss1, None, False, miss1)
    share = m_good / m
    miss2 = (1.0 - share) ** n_samples
    return PriorSizeBound(1.0 - miss1, 1.0 - miss2, share >= frac_good, miss1, miss2)


def trimmed_trips(trips, trim_fraction):
    """Valid trips sorted by cost with ceil(trim * n) removed from each end."""
    valid = sorted((t for t in trips if getattr(t, "valid", True)), key=lambda t: t.total_cost)
    # the epsilon keeps 0.1 * 30 from ceiling to 4
    drop = math.ceil(trim_fraction * len(valid) - 1e-9) if valid else 0
    return valid[drop:len(valid) - drop]


class PriorStore(BaseEstimator):
    """Anchor-keyed store of winning primitive indices.

    ``fit`` ingests trips (episode results or trip logs read from CSV);
    ``predict_proba`` returns the per-state sampling PMF, which is the
    beta-mixture at anchors with history and uniform elsewhere.

    Parameters
    ----------
    n_primitives : int
        Library size K.
    precision : int
        Decimal places kept when quantizing positions to anchors.
    trim_fraction : float
        Share of cheapest and of most expensive trips dropped before ingestion.
    beta : float
        Weight of the empirical PMF in the mixture.
    node_id : int or None
        When set, only steps logged as connected to this node are ingested.
    """

    def __init__(self, n_primitives=1000, precision=DEFAULT_PRECISION, trim_fraction=0.10,
                 beta=0.0, node_id=None):
        self.n_primitives = n_primitives
        self.precision = precision
        self.trim_fraction = trim_fraction
        self.beta = beta
        self.node_id = node_id

    def fit(self, trips, y=None):
        check_fraction(self.trim_fraction, "trim_fraction")
        check_fraction(self.beta, "beta")
        kept = trimmed_trips(trips, self.trim_fraction)
        if len(kept) < 3:
            warnings.warn(f"only {len(kept)} trips left after trimming", IngestionWarning,
                          stacklevel=2)
        records = {}
        for trip in kept:
            for rec in trip.trip_log:
                if rec.chosen_index < 0:
                    continue
                if self.node_id is not None and self.node_id not in rec.connected:
                    continue
                key = map_state_to_anchor((rec.x, rec.y), self.precision)
                if key not in records:
                    records[key] = AnchorRecord(key)
                records[key].add(rec.chosen_index)
        self.records_ = records
        self.n_trips_ingested_ = len(kept)
        return self

    def lookup(self, state):
        check_is_fitted(self, "records_")
        return self.records_.get(map_state_to_anchor(state, self.precision))

    def pmf(self, state, beta=None):
        beta = self.beta if beta is None else beta
        return mixed_pmf(self.lookup(state), beta, self.n_primitives)

    def predict_proba(self, states):
        states = check_states(states)
        return np.vstack([self.pmf(s) for s in states])

    @property
    def n_anchors(self):
        check_is_fitted(self, "records_")
        return len(self.records_)

    def to_dict(self):
        check_is_fitted(self, "records_")
        return {
            "version": STORE_FORMAT_VERSION,
            "precision": self.precision,
            "K": self.n_primitives,
            "records": [{"key": [k.qx, k.qy],
                         "counts": {str(j): c for j, c in sorted(r.counts.items())}}
                        for k, r in sorted(self.records_.items())],
        }

    @classmethod
    def from_dict(cls, doc, beta=0.0):
        if doc.get("version") != STORE_FORMAT_VERSION:
            raise ValueError(f"unsupported store format version {doc.get('version')!r}")
        store = cls(n_primitives=doc["K"], precision=doc["precision"], beta=beta)
        records = {}
        for item in doc["records"]:
            key = AnchorKey(*item["key"])
            records[key] = AnchorRecord(key, Counter({int(j): c for j, c in item["counts"].items()}))
        store.records_ = records
        store.n_trips_ingested_ = None
        return store

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, beta=0.0):
        return cls.from_dict(json.loads(Path(path).read_text()), beta=beta)


def ingest_trips(trips, trim_fraction=0.10, precision=DEFAULT_PRECISION, n_primitives=1000,
                 node_id=None):
    return PriorStore(n_primitives=n_primitives, precision=precision,
                      trim_fraction=trim_fraction, node_id=node_id).fit(trips)
