"""Closed-loop campaign runner: warm-start, fit, select, observe, score.

Cycles are strictly sequential (the protocol is adaptive); selections within
a batch never see same-batch outcomes. Independent (strategy, seed) cells of
a sweep may run in parallel because every random draw derives from the cell's
own seed through named streams.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .acquisition import AcquisitionSpec, select_batch
from .core import CampaignState, Threshold, hit_set, resolve_threshold
from .metrics import CycleMetrics, cumulative_hits, smape
from .oracle import OracleSpec, build_pool
from .surrogate import (
    SIGMA_FLOOR,
    KernelSpec,
    default_kernel_grid,
    fit,
    fit_hyperparameters,
)
from .theory import AuditConfig, TraceAudit, audit_trace


class CampaignError(RuntimeError):
    """A cycle failed in a way that aborts the campaign (surrogate failure)."""


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce a campaign except the per-cell seed.

    When `audit` is set, each finished trace is checked by the theory module
    and the report attached to the result.
    """

    oracle: OracleSpec
    acquisition: AcquisitionSpec
    threshold: Threshold
    cycles: int
    warm_start: int | None = None
    kernel_grid: tuple | None = None
    standardize: bool = True
    sigma_floor: float = SIGMA_FLOOR
    compute_smape: bool = True
    audit: "AuditConfig | None" = None

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.warm_start is not None and self.warm_start < 0:
            raise ValueError("warm_start must be >= 0")
        if self.kernel_grid is not None:
            object.__setattr__(self, "kernel_grid", tuple(self.kernel_grid))

    def resolved_warm_start(self) -> int:
        # Default: one batch's worth of uniformly labeled candidates.
        return self.acquisition.batch_size if self.warm_start is None else self.warm_start

    def resolved_grid(self, dimension: int) -> tuple:
        return self.kernel_grid if self.kernel_grid else default_kernel_grid(dimension)


@dataclass(frozen=True)
class CycleRecord:
    """Everything observed and chosen in one cycle.

    Wall-clock time is informational only and excluded from equality, so two
    traces compare equal iff their selections and scores match.
    """

    cycle: int
    batch: tuple
    responses: tuple
    kernel: KernelSpec
    metrics: CycleMetrics
    wall_clock: float = field(compare=False)


@dataclass(frozen=True)
class CampaignResult:
    """Full trace of one campaign cell plus its final scores."""

    strategy: str
    seed: int
    tau: float
    pool_size: int
    hit_set_size: int
    warm_ids: tuple
    warm_responses: tuple
    records: tuple
    truncated: bool
    audit: "TraceAudit | None" = None

    @property
    def batches(self) -> list:
        return [np.array(record.batch, dtype=np.intp) for record in self.records]

    @property
    def final_hits(self) -> int:
        return self.records[-1].metrics.cumulative_hits if self.records else 0

    @property
    def final_hit_ratio(self) -> float:
        return self.records[-1].metrics.hit_ratio if self.records else 0.0


def run_campaign(config: CampaignConfig, seed: int) -> CampaignResult:
    """Execute warm-start labeling followed by `cycles` selection rounds.

    Bitwise deterministic per (config, seed). If the pool runs out before the
    final cycle the result is truncated and flagged rather than erroring; the
    last batch may be short.
    """
    oracle_spec = config.oracle
    if oracle_spec.seed is None and oracle_spec.family != "tabular":
        oracle_spec = replace(oracle_spec, seed=seed)
    bundle = build_pool(oracle_spec)
    pool = bundle.pool
    tau = resolve_threshold(config.threshold, bundle.truth)
    star_size = int(hit_set(bundle.truth, tau).size)
    grid = config.resolved_grid(pool.dimension)

    state = CampaignState(
        pool_size=pool.size,
        batch_size=config.acquisition.batch_size,
        total_cycles=config.cycles,
        rng_seed=seed,
    )

    warm_n = min(config.resolved_warm_start(), pool.size)
    warm_ids: tuple = ()
    warm_responses: tuple = ()
    if warm_n > 0:
        chosen = np.sort(state.stream("warm-start").choice(pool.size, size=warm_n, replace=False))
        responses = [bundle.noisy_response(int(g), 0, seed) for g in chosen.tolist()]
        state.record_warm_start(chosen, responses)
        warm_ids = tuple(int(g) for g in chosen.tolist())
        warm_responses = tuple(float(y) for y in responses)

    records: list[CycleRecord] = []
    batches: list[np.ndarray] = []
    truncated = False
    for t in range(1, config.cycles + 1):
        started = time.perf_counter()
        available = state.available_ids()
        if available.size == 0:
            truncated = True
            break

        try:
            if len(state.history) >= 2:
                kernel = fit_hyperparameters(state.history, pool, grid,
                                             standardize=config.standardize)
            else:
                kernel = grid[0]
            surrogate = fit(state.history, pool, kernel,
                            standardize=config.standardize, sigma_floor=config.sigma_floor)
            posterior = surrogate.predict(available)
        except Exception as exc:
            raise CampaignError(f"cycle {t}: surrogate failed: {exc}") from exc

        smape_value = None
        if config.compute_smape:
            smape_value = smape(posterior.means, bundle.truth[available])

        batch = select_batch(
            config.acquisition, available, posterior, surrogate, tau,
            rng.stream(seed, "acquisition", t), config.sigma_floor,
        )
        responses = [bundle.noisy_response(int(g), t, seed) for g in batch.tolist()]
        state.record_batch(batch, responses)
        batches.append(batch)

        _, cum, ratios = cumulative_hits(batches, bundle.truth, tau, exclude_ids=warm_ids)
        new = int(cum[-1] - (cum[-2] if len(cum) > 1 else 0))
        records.append(CycleRecord(
            cycle=t,
            batch=tuple(int(g) for g in batch.tolist()),
            responses=tuple(float(y) for y in responses),
            kernel=kernel,
            metrics=CycleMetrics(cycle=t, new_hits=new, cumulative_hits=int(cum[-1]),
                                 hit_ratio=float(ratios[-1]), smape=smape_value),
            wall_clock=time.perf_counter() - started,
        ))

    trace_audit = None
    if config.audit is not None:
        trace_audit = audit_trace(pool, bundle.truth, batches, warm_ids, tau, config.audit)

    return CampaignResult(
        strategy=config.acquisition.strategy,
        seed=seed,
        tau=tau,
        pool_size=pool.size,
        hit_set_size=star_size,
        warm_ids=warm_ids,
        warm_responses=warm_responses,
        records=tuple(records),
        truncated=truncated,
        audit=trace_audit,
    )


@dataclass(frozen=True)
class SweepCell:
    strategy: str
    seed: int
    result: CampaignResult | None
    error: str | None


@dataclass(frozen=True)
class SweepResult:
    """All campaign cells of a sweep plus per-(strategy, cycle) aggregates."""

    cells: tuple
    aggregate: tuple

    def cell(self, strategy: str, seed: int) -> SweepCell:
        for cell in self.cells:
            if cell.strategy == strategy and cell.seed == seed:
                return cell
        raise KeyError(f"no cell for ({strategy}, {seed})")


def _run_cell(payload) -> SweepCell:
    config, strategy, seed = payload
    cell_config = replace(config, acquisition=replace(config.acquisition, strategy=strategy))
    try:
        return SweepCell(strategy=strategy, seed=seed,
                         result=run_campaign(cell_config, seed), error=None)
    except Exception as exc:
        return SweepCell(strategy=strategy, seed=seed, result=None, error=repr(exc))


def run_sweep(config: CampaignConfig, strategies, seeds, jobs: int = 1) -> SweepResult:
    """Run every (strategy, seed) cell independently and aggregate.

    Cell errors are isolated: a failing campaign records its error string
    and is excluded from aggregation. Results are ordered by (strategy,
    seed) regardless of worker scheduling, so output is identical for any
    job count.
    """
    strategies = list(strategies)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    payloads = [(config, strategy, seed) for strategy in strategies for seed in seeds]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            cells = list(executor.map(_run_cell, payloads))
    else:
        cells = [_run_cell(payload) for payload in payloads]
    cells.sort(key=lambda cell: (cell.strategy, cell.seed))
    return SweepResult(cells=tuple(cells), aggregate=tuple(aggregate_cells(cells)))


def aggregate_cells(cells) -> list:
    """Mean/std per (strategy, cycle) over the seeds that reached that cycle.

    Population std (ddof 0), so a single seed reports zero spread. SMAPE
    aggregates over cells where it is defined; None if nowhere defined.
    """
    by_strategy: dict = {}
    for cell in cells:
        if cell.result is None:
            continue
        by_strategy.setdefault(cell.strategy, []).append(cell.result)

    rows = []
    for strategy in sorted(by_strategy):
        results = by_strategy[strategy]
        max_cycle = max(len(result.records) for result in results)
        for t in range(1, max_cycle + 1):
            ratios, hits, errors = [], [], []
            for result in results:
                if len(result.records) < t:
                    continue
                record = result.records[t - 1]
                ratios.append(record.metrics.hit_ratio)
                hits.append(record.metrics.cumulative_hits)
                if record.metrics.smape is not None:
                    errors.append(record.metrics.smape)
            rows.append({
                "strategy": strategy,
                "cycle": t,
                "n_seeds": len(ratios),
                "hit_ratio_mean": float(np.mean(ratios)),
                "hit_ratio_std": float(np.std(ratios)),
                "hits_mean": float(np.mean(hits)),
                "hits_std": float(np.std(hits)),
                "smape_mean": float(np.mean(errors)) if errors else None,
                "smape_std": float(np.std(errors)) if errors else None,
            })
    return rows
