"""Complexity metrics against brute-force and library oracles."""

import math

import numpy as np
import pytest
from scipy.stats import spearmanr
from sklearn.cluster import DBSCAN as SkDBSCAN

from hitseek.complexity import (
    compute_report,
    dbscan,
    effective_dimensionality,
    feature_response_correlations,
    hit_cluster_stats,
    local_smoothness,
    n_clusters,
    spearman,
)


def brute_smoothness(features, responses, k):
    """Direct double-loop definition used as the oracle."""
    features = np.asarray(features, dtype=float).reshape(len(responses), -1)
    total = 0.0
    for i in range(len(responses)):
        dists = np.linalg.norm(features - features[i], axis=1)
        dists[i] = np.inf
        nearest = np.argsort(dists, kind="stable")[:k]
        total += np.mean(np.abs(responses[i] - np.asarray(responses)[nearest]))
    return total / len(responses)


class TestLocalSmoothness:
    def test_constant_response_is_zero(self):
        x = np.linspace(0, 1, 20)
        assert local_smoothness(x, np.full(20, 3.0), k=3) == 0.0

    def test_linear_grid_matches_brute_force(self):
        x = np.arange(10) * 0.37
        y = x.copy()
        expected = brute_smoothness(x, y, k=2)
        assert local_smoothness(x, y, k=2) == pytest.approx(expected, abs=1e-12)
        # Interior points average h, endpoints 1.5h.
        assert expected == pytest.approx(1.1 * 0.37, abs=1e-12)

    def test_scaling_is_homogeneous(self):
        gen = np.random.default_rng(0)
        x = gen.uniform(0, 1, (30, 2))
        y = gen.normal(size=30)
        base = local_smoothness(x, y, k=4)
        assert local_smoothness(x, 2.0 * y, k=4) == pytest.approx(2.0 * base)
        assert local_smoothness(x, y + 10.0, k=4) == pytest.approx(base)

    def test_random_instances_match_brute_force(self):
        gen = np.random.default_rng(5)
        for _ in range(5):
            x = gen.uniform(0, 1, (25, 3))
            y = gen.normal(size=25)
            assert local_smoothness(x, y, k=5) == pytest.approx(
                brute_smoothness(x, y, k=5), abs=1e-10)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            local_smoothness(np.zeros((3, 1)), np.zeros(3), k=3)


class TestDbscan:
    def test_two_far_blobs(self):
        gen = np.random.default_rng(0)
        blob_a = gen.normal(0.0, 0.01, (10, 2))
        blob_b = gen.normal(5.0, 0.01, (10, 2))
        labels = dbscan(np.vstack([blob_a, blob_b]), eps=0.2, min_pts=3)
        assert n_clusters(labels) == 2
        assert len(set(labels[:10])) == 1 and len(set(labels[10:])) == 1

    def test_single_dense_cluster(self):
        points = np.random.default_rng(1).uniform(0, 0.05, (12, 2))
        labels = dbscan(points, eps=0.2, min_pts=3)
        assert n_clusters(labels) == 1
        assert np.all(labels == labels[0])

    def test_scattered_points_all_noise(self):
        points = np.array([[0.0, 0.0], [10.0, 0.0]])
        labels = dbscan(points, eps=0.5, min_pts=3)
        assert n_clusters(labels) == 0
        assert np.all(labels == -1)

    def test_permutation_invariant_partitions(self):
        gen = np.random.default_rng(7)
        points = np.vstack([gen.normal(0, 0.1, (15, 2)), gen.normal(3, 0.1, (15, 2))])
        labels = dbscan(points, eps=0.5, min_pts=4)
        perm = gen.permutation(30)
        relabeled = dbscan(points[perm], eps=0.5, min_pts=4)
        partitions = lambda lab: {frozenset(np.flatnonzero(lab == c).tolist())
                                  for c in set(lab.tolist()) if c >= 0}
        original = {frozenset(perm.tolist().index(i) for i in part)
                    for part in partitions(labels)}
        assert original == partitions(relabeled)

    def test_matches_sklearn_on_random_instances(self):
        gen = np.random.default_rng(3)
        for trial in range(10):
            points = gen.uniform(0, 1, (60, 2))
            eps, min_pts = 0.12, 4
            ours = dbscan(points, eps=eps, min_pts=min_pts)
            theirs = SkDBSCAN(eps=eps, min_samples=min_pts).fit(points).labels_
            # Same number of clusters and same core-point partition; border
            # points may legitimately attach to either adjacent cluster.
            assert n_clusters(ours) == n_clusters(theirs)
            counts = np.bincount(ours[ours >= 0], minlength=n_clusters(ours))
            counts_sk = np.bincount(theirs[theirs >= 0], minlength=n_clusters(theirs))
            assert sorted(counts.tolist()) == sorted(counts_sk.tolist())
            assert np.array_equal(ours == -1, theirs == -1)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            dbscan(np.zeros((2, 2)), eps=0.0, min_pts=1)
        with pytest.raises(ValueError):
            dbscan(np.zeros((2, 2)), eps=0.5, min_pts=0)


class TestHitClusterStats:
    def test_single_hit_has_undefined_spread(self):
        features = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])
        responses = np.array([0.0, 0.0, 1.0])
        count, spread = hit_cluster_stats(features, responses, 0.5, min_pts=1)
        assert count == 1 and spread is None
        count, _ = hit_cluster_stats(features, responses, 0.5, min_pts=3)
        assert count == 0

    def test_two_far_corner_groups(self):
        gen = np.random.default_rng(2)
        corner_a = gen.uniform(0, 0.02, (5, 2))
        corner_b = 1.0 - gen.uniform(0, 0.02, (5, 2))
        filler = gen.uniform(0.4, 0.6, (10, 2))
        features = np.vstack([corner_a, corner_b, filler])
        responses = np.concatenate([np.ones(10), np.zeros(10)])
        count, spread = hit_cluster_stats(features, responses, 0.5)
        assert count == 2
        assert spread is not None and spread > 0

    def test_unit_square_corner_spread(self):
        # Six pairwise distances: four sides of 1 and two diagonals of sqrt 2.
        features = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        responses = np.ones(4)
        expected = float(np.std([1.0, 1.0, 1.0, 1.0, math.sqrt(2), math.sqrt(2)]))
        _, spread = hit_cluster_stats(features, responses, 0.5, min_pts=1)
        assert spread == pytest.approx(expected, abs=1e-12)

    def test_empty_hit_set_markers(self):
        count, spread = hit_cluster_stats(np.zeros((3, 2)), np.zeros(3), 1.0)
        assert count == 0 and spread is None


class TestEffectiveDimensionality:
    def test_line_in_3d_is_one(self):
        t = np.linspace(0, 1, 50)
        features = np.stack([t, 2 * t, -t], axis=1)
        assert effective_dimensionality(features) == 1

    def test_isotropic_gaussian_is_full_rank(self):
        points = np.random.default_rng(0).normal(size=(10_000, 2))
        assert effective_dimensionality(points) == 2

    def test_duplicated_columns_do_not_inflate(self):
        gen = np.random.default_rng(1)
        base = gen.normal(size=(200, 2))
        doubled = np.hstack([base, base])
        assert effective_dimensionality(doubled) == effective_dimensionality(base)

    def test_zero_variance_returns_marker(self):
        assert effective_dimensionality(np.ones((5, 3))) == 1


class TestSpearman:
    def test_identity_and_reversal(self):
        x = np.array([1.0, 2.0, 5.0, 9.0])
        assert spearman(x, x) == pytest.approx(1.0)
        assert spearman(x, -x) == pytest.approx(-1.0)

    def test_hand_ranked_example(self):
        assert spearman([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5)

    def test_constant_input_degenerates_to_zero(self):
        assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0

    def test_matches_scipy_with_ties(self):
        gen = np.random.default_rng(6)
        for _ in range(10):
            a = gen.integers(0, 5, 30).astype(float)  # heavy ties
            b = gen.normal(size=30)
            expected = spearmanr(a, b).statistic
            assert spearman(a, b) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            spearman([1.0], [1.0, 2.0])


class TestFeatureResponseCorrelations:
    def test_response_equal_to_feature_column(self):
        gen = np.random.default_rng(0)
        features = gen.uniform(0, 1, (100, 3))
        rho_max, _ = feature_response_correlations(features, features[:, 1])
        assert rho_max == pytest.approx(1.0)

    def test_independent_noise_stays_small(self):
        gen = np.random.default_rng(1)
        features = gen.uniform(0, 1, (1000, 2))
        responses = gen.normal(size=1000)
        rho_max, _ = feature_response_correlations(features, responses)
        assert rho_max < 0.15

    def test_collinear_distance_response_is_one(self):
        # Points on a ray with response equal to arclength: distance equals
        # absolute response difference for every pair.
        t = np.sort(np.random.default_rng(2).uniform(0, 10, 40))
        features = np.stack([t, 2 * t], axis=1) / math.sqrt(5)
        _, rho_dy = feature_response_correlations(features, t, pair_subsample_size=None)
        assert rho_dy == pytest.approx(1.0)

    def test_subsampled_pairs_are_seeded(self):
        gen = np.random.default_rng(3)
        features = gen.uniform(0, 1, (2500, 2))
        responses = gen.normal(size=2500)
        a = feature_response_correlations(features, responses, pair_subsample_size=500, seed=9)
        b = feature_response_correlations(features, responses, pair_subsample_size=500, seed=9)
        assert a == b


class TestComputeReport:
    def test_constant_response_report(self):
        gen = np.random.default_rng(0)
        features = gen.uniform(0, 1, (50, 2))
        report = compute_report(features, np.full(50, 2.0), tau=3.0)
        assert report.smoothness == 0.0
        assert report.rho_max == 0.0
        assert report.degenerate_response
        assert report.n_hits == 0
