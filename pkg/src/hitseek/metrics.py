"""Campaign scoring: cumulative hit recovery and predictive error.

Hits are adjudicated on noiseless truth (the simulator knows the response
function), never on noisy observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import hit_set


@dataclass(frozen=True)
class CycleMetrics:
    """Scores for one cycle; smape is None once the whole pool is sampled."""

    cycle: int
    new_hits: int
    cumulative_hits: int
    hit_ratio: float
    smape: float | None


def cumulative_hits(batches, truth, tau: float, exclude_ids=()):
    """Per-cycle new hits, cumulative hit count, and hit ratio.

    The hit ratio divides by the size of the true hit set minus any excluded
    ids (0.0 when that set is empty). Warm-start labels are passed as
    exclusions so pre-campaign freebies neither count as discoveries nor
    deflate the ratio of what the campaign could still discover. Batches
    must be pairwise disjoint.
    """
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    truth = np.asarray(truth, dtype=np.float64)
    star = set(hit_set(truth, tau).tolist()) - set(int(g) for g in exclude_ids)
    seen: set[int] = set()
    new_counts, cum_counts, ratios = [], [], []
    total = 0
    for batch in batches:
        ids = [int(g) for g in batch]
        if seen.intersection(ids):
            raise ValueError("batches are not pairwise disjoint")
        seen.update(ids)
        fresh = sum(1 for g in ids if g in star)
        total += fresh
        new_counts.append(fresh)
        cum_counts.append(total)
        ratios.append(total / len(star) if star else 0.0)
    return np.array(new_counts), np.array(cum_counts), np.array(ratios)


def smape(predicted, actual) -> float:
    """Symmetric mean absolute percentage error in [0, 200].

    Half-sum denominator convention; a term with both entries zero counts as
    zero error.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual lengths differ")
    if predicted.size == 0:
        raise ValueError("smape needs at least one element")
    denom = 0.5 * (np.abs(predicted) + np.abs(actual))
    terms = np.zeros_like(denom)
    mask = denom > 0
    terms[mask] = np.abs(predicted[mask] - actual[mask]) / denom[mask]
    return float(100.0 * np.mean(terms))


def evaluation_split(pool_size: int, sampled_ids) -> np.ndarray:
    """Held-out ids: everything in the pool not yet sampled, ascending."""
    sampled = set(int(g) for g in sampled_ids)
    return np.array([g for g in range(pool_size) if g not in sampled], dtype=np.intp)
