"""Dataset complexity metrics for response landscapes.

Local smoothness, density-based hit clustering, hit spread, effective
dimensionality, and rank correlations between features, distances, and
responses. All functions are pure; distance computations use dense
arithmetic (desk-scale pools only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from . import rng
from .core import hit_set
from .oracle import minmax_columns

DEFAULT_NEIGHBORS = 5
DEFAULT_MIN_PTS = 3
DEFAULT_EPS_SCALE = 0.1
DEFAULT_PAIR_SUBSAMPLE = 10_000
EXACT_PAIRS_LIMIT = 2000


def _as_matrix(features) -> np.ndarray:
    """Coerce features to an (N, d) float matrix; 1-D input becomes one column."""
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    return matrix


@dataclass(frozen=True)
class ComplexityReport:
    """One dataset's complexity scores; hit_spread is None below 2 hits."""

    smoothness: float
    n_clusters: int
    hit_spread: float | None
    effective_dim: int
    rho_max: float
    rho_distance_response: float
    degenerate_response: bool
    n_hits: int

    def as_dict(self) -> dict:
        return {
            "smoothness": self.smoothness,
            "n_clusters": self.n_clusters,
            "hit_spread": self.hit_spread,
            "effective_dim": self.effective_dim,
            "rho_max": self.rho_max,
            "rho_distance_response": self.rho_distance_response,
            "degenerate_response": self.degenerate_response,
            "n_hits": self.n_hits,
        }


def local_smoothness(features, responses, k: int = DEFAULT_NEIGHBORS) -> float:
    """Mean absolute response difference over each point's k nearest neighbors.

    Euclidean neighbors, self excluded. Translation-invariant and
    1-homogeneous in the responses.
    """
    features = _as_matrix(features)
    responses = np.asarray(responses, dtype=np.float64)
    n = responses.size
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points {n}")
    tree = cKDTree(features)
    _, idx = tree.query(features, k=k + 1)
    neighbor_idx = idx[:, 1:]
    diffs = np.abs(responses[:, None] - responses[neighbor_idx])
    return float(np.mean(diffs))


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns labels with -1 marking noise.

    Core points have at least min_pts neighbors within eps (self included);
    clusters are the density-connected components; non-core points fall into
    the first cluster that reaches them or stay noise.
    """
    points = _as_matrix(points)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    n = points.shape[0]
    tree = cKDTree(points)
    neighborhoods = tree.query_ball_point(points, r=eps)
    is_core = np.array([len(nbrs) >= min_pts for nbrs in neighborhoods])
    labels = np.full(n, -1, dtype=np.intp)
    cluster = 0
    for start in range(n):
        if labels[start] != -1 or not is_core[start]:
            continue
        labels[start] = cluster
        frontier = [start]
        while frontier:
            point = frontier.pop()
            for nbr in neighborhoods[point]:
                if labels[nbr] == -1:
                    labels[nbr] = cluster
                    if is_core[nbr]:
                        frontier.append(nbr)
        cluster += 1
    return labels


def n_clusters(labels) -> int:
    labels = np.asarray(labels)
    return int(np.unique(labels[labels >= 0]).size)


def hit_cluster_stats(features, responses, tau: float, eps: float | None = None,
                      min_pts: int = DEFAULT_MIN_PTS):
    """Cluster count and pairwise-distance spread of the hit set.

    Features are min-max normalized over the whole pool before clustering
    the hit rows; eps defaults to 0.1 * sqrt(d) in that normalized space.
    An empty hit set reports (0, None); a single hit has undefined spread.
    """
    features = _as_matrix(features)
    responses = np.asarray(responses, dtype=np.float64)
    normalized = minmax_columns(features)
    if eps is None:
        eps = DEFAULT_EPS_SCALE * math.sqrt(features.shape[1])
    hits = hit_set(responses, tau)
    if hits.size == 0:
        return 0, None
    labels = dbscan(normalized[hits], eps=eps, min_pts=min_pts)
    count = n_clusters(labels)
    if hits.size < 2:
        return count, None
    deltas = normalized[hits][:, None, :] - normalized[hits][None, :, :]
    dists = np.sqrt(np.sum(deltas * deltas, axis=-1))
    upper = dists[np.triu_indices(hits.size, k=1)]
    return count, float(np.std(upper))


def effective_dimensionality(features, variance_fraction: float = 0.95) -> int:
    """Smallest number of principal components explaining the variance fraction."""
    features = _as_matrix(features)
    if features.shape[0] < 2:
        raise ValueError("effective dimensionality needs at least 2 points")
    centered = features - features.mean(axis=0)
    cov = centered.T @ centered / (features.shape[0] - 1)
    eigvals = np.linalg.eigvalsh(cov)[::-1]
    eigvals = np.clip(eigvals, 0.0, None)
    total = eigvals.sum()
    if total <= 0:
        return 1
    cum = np.cumsum(eigvals) / total
    return int(np.searchsorted(cum, variance_fraction - 1e-12) + 1)


def spearman(a, b) -> float:
    """Rank correlation: Pearson correlation of mid-rank-transformed vectors.

    Returns 0.0 when either input is constant (degenerate ranks).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("inputs differ in length")
    if a.size < 2:
        raise ValueError("rank correlation needs at least 2 points")
    ra, rb = rankdata(a), rankdata(b)
    sa, sb = np.std(ra), np.std(rb)
    if sa == 0 or sb == 0:
        return 0.0
    return float(np.mean((ra - ra.mean()) * (rb - rb.mean())) / (sa * sb))


def feature_response_correlations(features, responses,
                                  pair_subsample_size: int | None = DEFAULT_PAIR_SUBSAMPLE,
                                  seed: int = 0):
    """Strongest single-feature rank correlation and distance-vs-response correlation.

    rho_max scans the feature columns against the responses. The
    distance correlation ranks Euclidean distance against absolute response
    difference over point pairs: all pairs when pair_subsample_size is None
    (or the pool is small enough), otherwise a seeded uniform subsample.
    """
    features = _as_matrix(features)
    responses = np.asarray(responses, dtype=np.float64)
    n = responses.size
    if n < 2:
        raise ValueError("need at least 2 points")

    rho_max = max(abs(spearman(features[:, j], responses)) for j in range(features.shape[1]))

    total_pairs = n * (n - 1) // 2
    if pair_subsample_size is None or total_pairs <= pair_subsample_size or n <= EXACT_PAIRS_LIMIT:
        ii, jj = np.triu_indices(n, k=1)
    else:
        gen = rng.stream(seed, "complexity-pairs")
        ii = gen.integers(0, n, pair_subsample_size)
        jj = gen.integers(0, n - 1, pair_subsample_size)
        jj = np.where(jj >= ii, jj + 1, jj)
    dists = np.sqrt(np.sum((features[ii] - features[jj]) ** 2, axis=1))
    dy = np.abs(responses[ii] - responses[jj])
    return float(rho_max), spearman(dists, dy)


def compute_report(features, responses, tau: float, *, k: int = DEFAULT_NEIGHBORS,
                   eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS,
                   pair_subsample_size: int | None = DEFAULT_PAIR_SUBSAMPLE,
                   seed: int = 0) -> ComplexityReport:
    """Assemble the full complexity report for one dataset realization."""
    responses = np.asarray(responses, dtype=np.float64)
    count, spread = hit_cluster_stats(features, responses, tau, eps=eps, min_pts=min_pts)
    rho_max, rho_dy = feature_response_correlations(
        features, responses, pair_subsample_size=pair_subsample_size, seed=seed
    )
    return ComplexityReport(
        smoothness=local_smoothness(features, responses, k=k),
        n_clusters=count,
        hit_spread=spread,
        effective_dim=effective_dimensionality(features),
        rho_max=rho_max,
        rho_distance_response=rho_dy,
        degenerate_response=bool(np.all(responses == responses[0])),
        n_hits=int(hit_set(responses, tau).size),
    )
