"""Shared domain types: candidates, observations, thresholds, campaign state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng


@dataclass(frozen=True)
class Candidate:
    """One untested perturbation: a stable integer id plus its feature vector."""

    id: int
    features: np.ndarray


class CandidatePool:
    """Finite candidate set with ids 0..N-1 and a contiguous feature matrix.

    Features are stored row-major in one (N, d) float64 array so kernel
    evaluations stay cache-friendly.
    """

    def __init__(self, features):
        matrix = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise ValueError("candidate pool needs a nonempty (N, d) feature matrix")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("candidate features must be finite")
        self._features = matrix

    @property
    def features(self) -> np.ndarray:
        return self._features

    @property
    def size(self) -> int:
        return self._features.shape[0]

    @property
    def dimension(self) -> int:
        return self._features.shape[1]

    def candidate(self, candidate_id: int) -> Candidate:
        if not 0 <= candidate_id < self.size:
            raise KeyError(f"candidate id {candidate_id} outside pool of size {self.size}")
        return Candidate(id=candidate_id, features=self._features[candidate_id])

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Observation:
    """A noisy response for one candidate. Cycle 0 marks warm-start labels."""

    candidate_id: int
    response: float
    cycle: int

    def __post_init__(self):
        if self.cycle < 0:
            raise ValueError("cycle must be >= 0")
        if not math.isfinite(self.response):
            raise ValueError("response must be finite")


@dataclass(frozen=True)
class Threshold:
    """Hit threshold, either an absolute response value or a top fraction.

    Quantile mode means "the top `value` fraction of the pool by true
    response"; the absolute cutoff is derived from the ground-truth vector by
    :func:`resolve_threshold`.
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("absolute", "quantile"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if not math.isfinite(self.value):
            raise ValueError("threshold value must be finite")
        if self.mode == "quantile" and not 0.0 < self.value < 1.0:
            raise ValueError("quantile threshold must lie in (0, 1)")

    @staticmethod
    def absolute(value: float) -> "Threshold":
        return Threshold("absolute", float(value))

    @staticmethod
    def quantile(value: float) -> "Threshold":
        return Threshold("quantile", float(value))

    @staticmethod
    def parse(spec: str) -> "Threshold":
        """Parse a compact threshold spec: 'q0.10' (quantile) or 'a0.5' (absolute)."""
        text = spec.strip()
        if len(text) < 2 or text[0] not in ("q", "a"):
            raise ValueError(f"threshold spec {spec!r} must look like 'q0.10' or 'a0.5'")
        try:
            value = float(text[1:])
        except ValueError as exc:
            raise ValueError(f"threshold spec {spec!r} has a non-numeric value") from exc
        return Threshold.quantile(value) if text[0] == "q" else Threshold.absolute(value)


def resolve_threshold(threshold: Threshold, truth) -> float:
    """Turn a threshold into an absolute cutoff against the ground-truth vector.

    Quantile mode returns the midpoint between the ceil(q*N)-th and the next
    largest truth values, so that with pairwise-distinct truths exactly
    ceil(q*N) candidates satisfy f(g) > tau under strict inequality. Boundary
    ties shrink the hit set (strict-inequality membership).
    """
    values = np.asarray(truth, dtype=np.float64)
    if values.size == 0:
        raise ValueError("truth vector is empty")
    if not np.all(np.isfinite(values)):
        raise ValueError("truth vector contains non-finite entries")
    if threshold.mode == "absolute":
        return float(threshold.value)
    n = values.size
    k = math.ceil(threshold.value * n)
    ordered = np.sort(values)[::-1]
    if k >= n:
        return float(ordered[-1] - 1.0)
    return float(0.5 * (ordered[k - 1] + ordered[k]))


def hit_set(truth, tau: float) -> np.ndarray:
    """Ids of candidates whose true response strictly exceeds tau (ascending)."""
    values = np.asarray(truth, dtype=np.float64)
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    if not np.all(np.isfinite(values)):
        raise ValueError("truth vector contains non-finite entries")
    return np.flatnonzero(values > tau)


@dataclass
class CampaignState:
    """Mutable record of one campaign: labeled history and selected batches.

    Mutated only by the campaign runner, on a single logical thread. Batches
    are pairwise disjoint and every candidate is observed at most once
    (queries without replacement); warm-start labels carry cycle 0 and are
    not counted as batches.
    """

    pool_size: int
    batch_size: int
    total_cycles: int
    rng_seed: int
    history: list = field(default_factory=list)
    batches: list = field(default_factory=list)
    cycle: int = 0

    def stream(self, *labels: object) -> np.random.Generator:
        """Named deterministic stream derived from the campaign seed."""
        return rng.stream(self.rng_seed, *labels)

    def observed_ids(self) -> set:
        return {obs.candidate_id for obs in self.history}

    def available_ids(self) -> np.ndarray:
        """Unsampled candidate ids, ascending."""
        seen = self.observed_ids()
        return np.array([g for g in range(self.pool_size) if g not in seen], dtype=np.intp)

    def record_warm_start(self, ids, responses) -> None:
        self._record(ids, responses, cycle=0, as_batch=False)

    def record_batch(self, ids, responses) -> None:
        ids = np.asarray(ids, dtype=np.intp)
        if ids.size > self.batch_size:
            raise ValueError(f"batch of size {ids.size} exceeds limit {self.batch_size}")
        self.cycle += 1
        self._record(ids, responses, cycle=self.cycle, as_batch=True)

    def _record(self, ids, responses, cycle: int, as_batch: bool) -> None:
        ids = np.asarray(ids, dtype=np.intp)
        responses = np.asarray(responses, dtype=np.float64)
        if ids.size != responses.size:
            raise ValueError("ids and responses differ in length")
        if len(set(ids.tolist())) != ids.size:
            raise ValueError("duplicate candidate ids within one batch")
        seen = self.observed_ids()
        clash = seen.intersection(ids.tolist())
        if clash:
            raise ValueError(f"candidates {sorted(clash)} were already observed")
        for g, y in zip(ids.tolist(), responses.tolist()):
            if not 0 <= g < self.pool_size:
                raise ValueError(f"candidate id {g} outside pool of size {self.pool_size}")
            self.history.append(Observation(candidate_id=g, response=y, cycle=cycle))
        if as_batch:
            self.batches.append(ids.copy())
