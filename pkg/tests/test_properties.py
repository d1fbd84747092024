"""Randomized invariants: scoring bounds, selection contracts, budgets."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hitseek import rng
from hitseek.acquisition import (
    select_poh,
    select_random,
    select_thompson_hit,
    select_topk,
)
from hitseek.core import CandidatePool, hit_set
from hitseek.metrics import smape
from hitseek.surrogate import KernelSpec, PosteriorSummary, fit

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=1000, deadline=None)
@given(st.lists(finite, min_size=1, max_size=20), st.data())
def test_smape_symmetric_and_bounded(values, data):
    other = data.draw(st.lists(finite, min_size=len(values), max_size=len(values)))
    forward = smape(values, other)
    assert 0.0 <= forward <= 200.0
    assert forward == smape(other, values)


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(finite, min_size=1, max_size=30),
    st.floats(min_value=-1e5, max_value=1e5, allow_nan=False),
    st.floats(min_value=0.0, max_value=1e5, allow_nan=False),
)
def test_hit_set_monotone_in_tau(truth, tau, bump):
    lo = set(hit_set(truth, tau).tolist())
    hi = set(hit_set(truth, tau + bump).tolist())
    assert hi.issubset(lo)


@settings(max_examples=1000, deadline=None)
@given(
    st.integers(min_value=1, max_value=25),
    st.integers(min_value=1, max_value=10),
    st.integers(min_value=0, max_value=2**32 - 1),
    st.sampled_from(["poh", "top_k", "random", "thompson_hit"]),
)
def test_selectors_return_disjoint_subset_of_expected_size(n_candidates, b, seed, kind):
    gen = rng.stream(seed, "prop-posterior")
    ids = np.arange(100, 100 + n_candidates)
    means = gen.normal(size=n_candidates)
    sigmas = gen.uniform(0.05, 2.0, n_candidates)
    posterior = PosteriorSummary(means=means, stddevs=sigmas)
    stream = rng.stream(seed, "prop-select")
    if kind == "poh":
        batch = select_poh(ids, posterior, 0.0, b, stream)
    elif kind == "top_k":
        batch = select_topk(ids, posterior, b)
    elif kind == "random":
        batch = select_random(ids, b, stream)
    else:
        pool = CandidatePool(gen.uniform(0, 1, (100 + n_candidates, 1)))
        surrogate = fit([(0, 0.5)], pool, KernelSpec(lengthscale=0.3, noise_variance=0.1))
        batch = select_thompson_hit(ids, surrogate, 0.0, b, stream)
    assert batch.size == min(b, n_candidates)
    assert len(set(batch.tolist())) == batch.size
    assert set(batch.tolist()).issubset(set(ids.tolist()))


@settings(max_examples=1000, deadline=None)
@given(
    st.integers(min_value=4, max_value=24),
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=0, max_value=6),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_campaign_budget_and_disjoint_batches(pool_size, batch, cycles, warm, seed):
    from hitseek.acquisition import AcquisitionSpec
    from hitseek.campaign import CampaignConfig, run_campaign
    from hitseek.core import Threshold
    from hitseek.oracle import OracleSpec

    warm = min(warm, pool_size - 1)
    config = CampaignConfig(
        oracle=OracleSpec(family="sine1d", pool_size=pool_size, seed=0),
        acquisition=AcquisitionSpec(strategy="random", batch_size=batch),
        threshold=Threshold.quantile(0.25),
        cycles=cycles,
        warm_start=warm,
        kernel_grid=(KernelSpec(lengthscale=0.3, noise_variance=0.1),),
        compute_smape=False,
    )
    result = run_campaign(config, seed=seed)
    seen = set(result.warm_ids)
    for record in result.records:
        ids = set(record.batch)
        assert len(ids) == len(record.batch)
        assert ids.isdisjoint(seen)
        assert len(record.batch) <= batch
        seen |= ids
    assert len(seen) == min(warm + cycles * batch, pool_size)
