"""Hit counting and SMAPE scoring."""

import numpy as np
import pytest

from hitseek.core import hit_set
from hitseek.metrics import cumulative_hits, evaluation_split, smape


class TestCumulativeHits:
    def test_all_hits_gives_ratio_one(self):
        truth = np.array([1.0, 1.0, 1.0, 0.0])
        new, cum, ratios = cumulative_hits([[0], [1], [2]], truth, 0.5)
        assert cum.tolist() == [1, 2, 3]
        assert ratios[-1] == 1.0

    def test_no_hits_all_zero(self):
        truth = np.array([0.0, 0.0, 1.0])
        new, cum, ratios = cumulative_hits([[0], [1]], truth, 0.5)
        assert cum.tolist() == [0, 0]
        assert ratios.tolist() == [0.0, 0.0]

    def test_hand_count(self):
        truth = np.array([0.0, 1.0, 2.0, 3.0])
        new, cum, ratios = cumulative_hits([[3], [0]], truth, 1.5)
        assert cum.tolist() == [1, 1]
        assert ratios.tolist() == [0.5, 0.5]

    def test_overlapping_batches_rejected(self):
        with pytest.raises(ValueError):
            cumulative_hits([[0, 1], [1, 2]], np.zeros(4), 0.5)

    def test_matches_hit_set_intersection(self):
        gen = np.random.default_rng(4)
        truth = gen.normal(size=40)
        batches = [list(range(0, 5)), list(range(5, 10)), list(range(10, 15))]
        _, cum, _ = cumulative_hits(batches, truth, 0.2)
        union = {g for batch in batches for g in batch}
        star = set(hit_set(truth, 0.2).tolist())
        assert cum[-1] == len(union & star)

    def test_nonfinite_tau_rejected(self):
        with pytest.raises(ValueError):
            cumulative_hits([[0]], np.zeros(2), np.inf)


class TestSmape:
    def test_perfect_prediction_is_zero(self):
        assert smape([1.0, -2.0, 3.0], [1.0, -2.0, 3.0]) == 0.0

    def test_zero_versus_one_is_two_hundred(self):
        assert smape([0.0], [1.0]) == pytest.approx(200.0)

    def test_symmetry(self):
        gen = np.random.default_rng(1)
        p, a = gen.normal(size=50), gen.normal(size=50)
        assert smape(p, a) == pytest.approx(smape(a, p))

    def test_both_zero_counts_as_zero_error(self):
        assert smape([0.0, 1.0], [0.0, 1.0]) == 0.0

    def test_bounds(self):
        gen = np.random.default_rng(2)
        for _ in range(100):
            p, a = gen.normal(size=10), gen.normal(size=10)
            assert 0.0 <= smape(p, a) <= 200.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            smape([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            smape([], [])


class TestEvaluationSplit:
    def test_nothing_sampled_gives_whole_pool(self):
        assert evaluation_split(4, []).tolist() == [0, 1, 2, 3]

    def test_everything_sampled_gives_empty(self):
        assert evaluation_split(3, [0, 1, 2]).size == 0

    def test_disjoint_from_sampled(self):
        held = set(evaluation_split(10, [1, 5, 7]).tolist())
        assert held.isdisjoint({1, 5, 7})
        assert held | {1, 5, 7} == set(range(10))
