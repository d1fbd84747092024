"""Batch-selection strategies over the surrogate posterior.

All selectors return a subset of the unsampled candidate ids with no
duplicates and size min(b, |unsampled|). They are pure given the posterior
and the random stream, so scoring can run concurrently across candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .surrogate import SIGMA_FLOOR, FittedSurrogate, PosteriorSummary

STRATEGIES = ("probability_of_hit", "thompson", "thompson_hit", "top_k", "random")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which selection rule to run and how many candidates per cycle."""

    strategy: str
    batch_size: int
    # Batch construction for plain Thompson sampling: one independent joint
    # draw per batch slot ("per_slot"), or a single draw whose top-b fills
    # the batch ("single_draw").
    thompson_mode: str = "per_slot"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.thompson_mode not in ("per_slot", "single_draw"):
            raise ValueError(f"unknown thompson_mode {self.thompson_mode!r}")


def hit_probability(mu, sigma, tau: float, sigma_floor: float = SIGMA_FLOOR):
    """Posterior probability that the response exceeds tau: 1 - Phi((tau-mu)/sigma).

    Below the sigma floor the Gaussian degenerates to a point mass and the
    probability collapses to the indicator mu > tau.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and math.isfinite(tau)):
        raise ValueError("hit_probability needs finite mu, sigma, tau")
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    safe_sigma = np.maximum(sigma, sigma_floor)
    gaussian = 1.0 - ndtr((tau - mu) / safe_sigma)
    out = np.where(sigma < sigma_floor, (mu > tau).astype(np.float64), gaussian)
    return float(out) if out.ndim == 0 else out


def select_poh(candidate_ids, posterior: PosteriorSummary, tau: float, b: int,
               rng: np.random.Generator, sigma_floor: float = SIGMA_FLOOR) -> np.ndarray:
    """Top-b candidates by posterior hit probability, exact ties randomized.

    Ranks by the z-score (mu - tau) / sigma, which orders identically to the
    probability itself without evaluating the normal CDF per candidate.
    """
    candidate_ids = _as_ids(candidate_ids)
    z = (posterior.means - tau) / np.maximum(posterior.stddevs, sigma_floor)
    tie_break = rng.permutation(candidate_ids.size)
    order = np.lexsort((tie_break, -z))
    return candidate_ids[order[: min(b, candidate_ids.size)]]


def select_topk(candidate_ids, posterior: PosteriorSummary, b: int) -> np.ndarray:
    """Top-b candidates by predictive mean; ties resolved by id order."""
    candidate_ids = _as_ids(candidate_ids)
    order = np.lexsort((candidate_ids, -posterior.means))
    return candidate_ids[order[: min(b, candidate_ids.size)]]


def select_random(candidate_ids, b: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform batch without replacement."""
    candidate_ids = _as_ids(candidate_ids)
    take = min(b, candidate_ids.size)
    return rng.choice(candidate_ids, size=take, replace=False)


def select_thompson(candidate_ids, surrogate: FittedSurrogate, b: int,
                    rng: np.random.Generator, mode: str = "per_slot") -> np.ndarray:
    """Thompson sampling: posterior draws, batch slots filled by their argmax.

    per_slot draws one independent joint sample per slot and de-duplicates
    within the batch; single_draw takes the top-b of one sample.
    """
    candidate_ids = _as_ids(candidate_ids)
    take = min(b, candidate_ids.size)
    if mode == "single_draw":
        sample = np.atleast_1d(surrogate.sample_joint(candidate_ids, rng))
        order = np.lexsort((candidate_ids, -sample))
        return candidate_ids[order[:take]]
    draws = np.atleast_2d(surrogate.sample_joint(candidate_ids, rng, draws=take))
    chosen_pos: list[int] = []
    for j in range(take):
        sample = draws[j].copy()
        sample[chosen_pos] = -np.inf
        chosen_pos.append(int(np.argmax(sample)))
    return candidate_ids[chosen_pos]


def select_thompson_hit(candidate_ids, surrogate: FittedSurrogate, tau: float, b: int,
                        rng: np.random.Generator) -> np.ndarray:
    """One joint posterior draw; uniform subset of its sampled hit set.

    If the sampled hit set has at least b members, return a uniform random
    b-subset of it; otherwise take the whole sampled hit set and fill the
    remaining slots with the highest sampled values among the rest.
    """
    candidate_ids = _as_ids(candidate_ids)
    take = min(b, candidate_ids.size)
    sample = np.atleast_1d(surrogate.sample_joint(candidate_ids, rng))
    hit_mask = sample > tau
    hit_pos = np.flatnonzero(hit_mask)
    if hit_pos.size >= take:
        return candidate_ids[rng.choice(hit_pos, size=take, replace=False)]
    rest_pos = np.flatnonzero(~hit_mask)
    order = np.lexsort((candidate_ids[rest_pos], -sample[rest_pos]))
    fill = rest_pos[order[: take - hit_pos.size]]
    return candidate_ids[np.concatenate([hit_pos, fill])]


def select_batch(spec: AcquisitionSpec, candidate_ids, posterior: PosteriorSummary,
                 surrogate: FittedSurrogate, tau: float, rng: np.random.Generator,
                 sigma_floor: float = SIGMA_FLOOR) -> np.ndarray:
    """Dispatch to the configured strategy."""
    if spec.strategy == "probability_of_hit":
        return select_poh(candidate_ids, posterior, tau, spec.batch_size, rng, sigma_floor)
    if spec.strategy == "top_k":
        return select_topk(candidate_ids, posterior, spec.batch_size)
    if spec.strategy == "random":
        return select_random(candidate_ids, spec.batch_size, rng)
    if spec.strategy == "thompson":
        return select_thompson(candidate_ids, surrogate, spec.batch_size, rng, spec.thompson_mode)
    if spec.strategy == "thompson_hit":
        return select_thompson_hit(candidate_ids, surrogate, tau, spec.batch_size, rng)
    raise ValueError(f"unknown strategy {spec.strategy!r}")


def _as_ids(candidate_ids) -> np.ndarray:
    ids = np.asarray(candidate_ids, dtype=np.intp)
    if ids.size == 0:
        raise ValueError("no unsampled candidates left to select from")
    return ids
