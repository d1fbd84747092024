"""Numerical audits of the hit-discovery guarantees on small instances.

Checks, by direct computation, the ingredients behind the hit-count lower
bound: the one-sided normal CDF bound, the batched sum-of-stddevs bound
against exact maximum information gain, the mistake-implies-uncertainty
implication for the probability-of-hit rule, and the empirical queried-hit
fraction. Exact information gain is enumerated, so pools must stay small.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import rng
from .core import CandidatePool, hit_set, resolve_threshold, Threshold
from .surrogate import KernelSpec, fit, kernel_matrix

ENUMERATION_GUARD = 1_000_000


class EnumerationGuardError(RuntimeError):
    """Requested subset enumeration exceeds the combinatorial guard."""


@dataclass(frozen=True)
class AuditConfig:
    """Knobs for the audit suite; the pool must stay small enough for exact gamma."""

    delta: float = 0.05
    epsilon: float = 0.2
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(lengthscale=0.15, noise_variance=1e-4))
    pool_size: int = 48
    trials: int = 20
    seed: int = 0
    sigma_pool_size: int = 12
    sigma_cycles: int = 3
    sigma_batch: int = 2
    noise_grid: tuple = (0.1, 1.0, 10.0)
    mistake_tau_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.pool_size > 64:
            raise ValueError("audit pools are capped at 64 candidates")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def information_gain(features, kernel: KernelSpec, noise_variance: float) -> float:
    """Mutual information of noisy observations at a subset: 0.5 log det(I + K/lambda).

    Computed through a Cholesky factorization of I + K/lambda for stability.
    An empty subset carries zero information.
    """
    if noise_variance <= 0:
        raise ValueError("noise_variance must be positive")
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        return 0.0
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    gram = kernel_matrix(kernel, features)
    gram = 0.5 * (gram + gram.T)
    m = np.eye(gram.shape[0]) + gram / noise_variance
    try:
        factor = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError("kernel matrix is not positive semidefinite") from exc
    return float(np.sum(np.log(np.diag(factor))))


@dataclass(frozen=True)
class GammaResult:
    """Exact and greedy maximum information gain for one subset size."""

    exact: float
    greedy: float
    exact_subset: tuple


def max_information_gain_exact(features, n: int, kernel: KernelSpec,
                               noise_variance: float,
                               guard: int = ENUMERATION_GUARD) -> GammaResult:
    """Exact gamma_n by enumerating all n-subsets, plus the greedy value.

    Enumeration is vectorized through stacked log-determinants; the guard
    rejects instances with more than `guard` subsets.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    pool_n = features.shape[0]
    if not 0 <= n <= pool_n:
        raise ValueError(f"subset size {n} invalid for pool of {pool_n}")
    if n == 0:
        return GammaResult(exact=0.0, greedy=0.0, exact_subset=())
    if math.comb(pool_n, n) > guard:
        raise EnumerationGuardError(
            f"C({pool_n}, {n}) = {math.comb(pool_n, n)} exceeds the enumeration guard {guard}"
        )
    gram = kernel_matrix(kernel, features)
    gram = 0.5 * (gram + gram.T)
    scaled = gram / noise_variance

    best_value, best_subset = -np.inf, ()
    combos = itertools.combinations(range(pool_n), n)
    chunk_size = 4096
    while True:
        chunk = list(itertools.islice(combos, chunk_size))
        if not chunk:
            break
        idx = np.array(chunk)
        sub = scaled[idx[:, :, None], idx[:, None, :]]
        sub = sub + np.eye(n)[None, :, :]
        _, logdets = np.linalg.slogdet(sub)
        pos = int(np.argmax(logdets))
        if logdets[pos] > best_value:
            best_value = float(logdets[pos])
            best_subset = tuple(chunk[pos])
    exact = 0.5 * best_value

    greedy = _greedy_information_gain(features, n, kernel, noise_variance)
    return GammaResult(exact=exact, greedy=greedy, exact_subset=best_subset)


def _greedy_information_gain(features, n: int, kernel: KernelSpec, noise_variance: float) -> float:
    chosen: list[int] = []
    remaining = set(range(features.shape[0]))
    value = 0.0
    for _ in range(n):
        best_gain, best_point = -np.inf, None
        for point in sorted(remaining):
            gain = information_gain(features[chosen + [point]], kernel, noise_variance)
            if gain > best_gain:
                best_gain, best_point = gain, point
        chosen.append(best_point)
        remaining.discard(best_point)
        value = best_gain
    return value


def beta_schedule(pool_size: int, t: int, delta: float) -> float:
    """Confidence width multiplier: sqrt(2 ln(N pi^2 t^2 / (6 delta))).

    A union-bound schedule over candidates and rounds, nondecreasing in t
    and growing like sqrt(log t).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(2.0 * math.log(pool_size * math.pi**2 * t**2 / (6.0 * delta)))


@dataclass(frozen=True)
class CdfBoundAudit:
    """Grid sweep of Phi(z) >= 1/2 - (-z)_+ / sqrt(2 pi)."""

    violations: int
    min_slack: float
    worst_z: float
    grid_points: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def audit_cdf_bound(z_low: float = -10.0, z_high: float = 10.0, step: float = 1e-3,
                    tolerance: float = 1e-12) -> CdfBoundAudit:
    """Verify the one-sided linear lower bound on the normal CDF over a dense grid."""
    grid = np.arange(z_low, z_high + 0.5 * step, step)
    lower = 0.5 - np.maximum(-grid, 0.0) / math.sqrt(2.0 * math.pi)
    slack = ndtr(grid) - lower
    worst = int(np.argmin(slack))
    return CdfBoundAudit(
        violations=int(np.sum(slack < -tolerance)),
        min_slack=float(slack[worst]),
        worst_z=float(grid[worst]),
        grid_points=int(grid.size),
    )


@dataclass(frozen=True)
class SigmaSumAudit:
    """Batched sum of predictive stddevs against its information-gain bound."""

    lhs: float
    rhs: float
    gamma_total: float
    gamma_rounds: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 1e-9


def audit_batch_sigma_sum(pool: CandidatePool, batches, kernel: KernelSpec,
                          guard: int = ENUMERATION_GUARD) -> SigmaSumAudit:
    """Replay a trace and compare sum of selected stddevs to the batch bound.

    The left side refits the GP on each round's history prefix (responses do
    not matter for predictive variance, so zeros are used) and accumulates
    the stddevs of the selected points. The right side is
    sqrt((2 gamma_{Tb} / c) (Tb + 2 b^2 gamma_T / c)) with c = log(1 + 1/lambda).
    """
    lam = kernel.noise_variance
    if lam <= 0:
        raise ValueError("the bound needs positive observation-noise variance")
    batches = [np.asarray(batch, dtype=np.intp) for batch in batches]
    rounds = len(batches)
    batch_size = max(batch.size for batch in batches)
    total = int(sum(batch.size for batch in batches))

    lhs = 0.0
    prefix: list = []
    for batch in batches:
        surrogate = fit(prefix, pool, kernel, standardize=False)
        lhs += float(np.sum(surrogate.predict(batch).stddevs))
        prefix = prefix + [(int(g), 0.0) for g in batch.tolist()]

    gamma_total = max_information_gain_exact(pool.features, total, kernel, lam, guard).exact
    gamma_rounds = max_information_gain_exact(pool.features, rounds, kernel, lam, guard).exact
    c = math.log(1.0 + 1.0 / lam)
    rhs = math.sqrt((2.0 * gamma_total / c) * (total + 2.0 * batch_size**2 * gamma_rounds / c))
    return SigmaSumAudit(lhs=lhs, rhs=rhs, gamma_total=gamma_total, gamma_rounds=gamma_rounds)


@dataclass(frozen=True)
class MistakeAudit:
    """Cycles where selecting a clear non-hit must carry large uncertainty."""

    cycles_checked: int
    cycles_confident: int
    cases: int
    violations: int
    vacuous: bool

    @property
    def passed(self) -> bool:
        return self.violations == 0


def audit_mistake_implies_uncertainty(pool: CandidatePool, truth, batches, tau: float,
                                      epsilon: float, delta: float, kernel: KernelSpec,
                                      warm_ids=()) -> MistakeAudit:
    """Check sigma_t(g) >= epsilon / (2 beta_t) whenever the premises hold.

    Premises per cycle: the confidence event |f - mu_t| <= beta_t sigma_t
    holds over the whole pool, some unselected available candidate clears
    tau + epsilon, and a selected candidate sits at or below tau - epsilon.
    Cycles failing the confidence event are excluded. If no candidate ever
    clears tau + epsilon the audit is vacuous.
    """
    truth = np.asarray(truth, dtype=np.float64)
    margin_ids = set(np.flatnonzero(truth >= tau + epsilon).tolist())
    if not margin_ids:
        return MistakeAudit(cycles_checked=len(batches), cycles_confident=0,
                            cases=0, violations=0, vacuous=True)

    all_ids = np.arange(pool.size)
    prefix = [(int(g), float(truth[g])) for g in warm_ids]
    queried = set(int(g) for g in warm_ids)
    confident = cases = violations = 0
    for t, batch in enumerate(batches, start=1):
        batch = [int(g) for g in np.asarray(batch).tolist()]
        surrogate = fit(prefix, pool, kernel, standardize=False)
        posterior = surrogate.predict(all_ids)
        beta = beta_schedule(pool.size, t, delta)
        if np.any(np.abs(truth - posterior.means) > beta * posterior.stddevs):
            prefix += [(g, float(truth[g])) for g in batch]
            queried.update(batch)
            continue
        confident += 1
        available_margin = margin_ids - queried - set(batch)
        if available_margin:
            for g in batch:
                if truth[g] <= tau - epsilon:
                    cases += 1
                    if posterior.stddevs[g] < epsilon / (2.0 * beta) - 1e-12:
                        violations += 1
        prefix += [(g, float(truth[g])) for g in batch]
        queried.update(batch)
    return MistakeAudit(cycles_checked=len(batches), cycles_confident=confident,
                        cases=cases, violations=violations, vacuous=False)


@dataclass(frozen=True)
class TraceAudit:
    """Per-campaign audit: mistake-uncertainty check plus hit-fraction path."""

    mistake: MistakeAudit
    hit_fraction: tuple
    beta_values: tuple

    def as_dict(self) -> dict:
        return {
            "mistake_violations": self.mistake.violations,
            "mistake_cases": self.mistake.cases,
            "cycles_confident": self.mistake.cycles_confident,
            "vacuous": self.mistake.vacuous,
            "hit_fraction": list(self.hit_fraction),
            "beta_values": list(self.beta_values),
        }


def audit_trace(pool: CandidatePool, truth, batches, warm_ids, tau: float,
                config: "AuditConfig") -> TraceAudit:
    """Audit one finished campaign trace with the audit kernel.

    The mistake-uncertainty check conditions on the confidence event, so a
    campaign whose surrogate settings differ from the audit kernel simply
    contributes fewer confident cycles rather than spurious violations.
    """
    mistake = audit_mistake_implies_uncertainty(
        pool, truth, batches, tau, config.epsilon, config.delta, config.kernel,
        warm_ids=warm_ids,
    )
    fractions = empirical_hit_fraction(batches, truth, tau)
    betas = [beta_schedule(pool.size, t, config.delta) for t in range(1, len(batches) + 1)]
    return TraceAudit(mistake=mistake, hit_fraction=tuple(float(f) for f in fractions),
                      beta_values=tuple(betas))


def empirical_hit_fraction(batches, truth, tau: float) -> np.ndarray:
    """Cumulative fraction of queried candidates that are true hits, per cycle."""
    truth = np.asarray(truth, dtype=np.float64)
    star = set(hit_set(truth, tau).tolist())
    hits = queries = 0
    fractions = []
    for batch in batches:
        ids = [int(g) for g in np.asarray(batch).tolist()]
        queries += len(ids)
        hits += sum(1 for g in ids if g in star)
        fractions.append(hits / queries if queries else 0.0)
    return np.array(fractions)


@dataclass(frozen=True)
class AuditReport:
    """Aggregated outcome of the audit suite, serializable for the results log."""

    cdf_bound: CdfBoundAudit
    sigma_sum_trials: list
    gamma_trials: list
    mistake: MistakeAudit
    hit_fraction_mean: list
    beta_values: list

    @property
    def passed(self) -> bool:
        sigma_ok = all(trial.passed for trial in self.sigma_sum_trials)
        gamma_ok = all(
            trial.greedy <= trial.exact + 1e-9
            and trial.greedy >= (1.0 - 1.0 / math.e) * trial.exact - 1e-9
            for trial in self.gamma_trials
        )
        return self.cdf_bound.passed and sigma_ok and gamma_ok and self.mistake.passed

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "cdf_bound": {
                "violations": self.cdf_bound.violations,
                "min_slack": self.cdf_bound.min_slack,
                "worst_z": self.cdf_bound.worst_z,
                "grid_points": self.cdf_bound.grid_points,
            },
            "sigma_sum_trials": [
                {"lhs": t.lhs, "rhs": t.rhs, "gamma_total": t.gamma_total,
                 "gamma_rounds": t.gamma_rounds, "passed": t.passed}
                for t in self.sigma_sum_trials
            ],
            "gamma_trials": [
                {"exact": t.exact, "greedy": t.greedy} for t in self.gamma_trials
            ],
            "mistake_uncertainty": {
                "cycles_checked": self.mistake.cycles_checked,
                "cycles_confident": self.mistake.cycles_confident,
                "cases": self.mistake.cases,
                "violations": self.mistake.violations,
                "vacuous": self.mistake.vacuous,
            },
            "hit_fraction_mean": self.hit_fraction_mean,
            "beta_values": self.beta_values,
        }


def run_audit(config: AuditConfig) -> AuditReport:
    """Run the full audit suite on small synthetic instances.

    Sum-of-stddevs trials draw random unit-square pools with uniformly random
    disjoint batches (the bound holds for any adaptive strategy); the mistake
    audit runs the probability-of-hit loop on a noiseless 1-D sine pool with
    a fixed kernel.
    """
    from .acquisition import select_poh
    from .oracle import OracleSpec, build_pool

    cdf = audit_cdf_bound()

    sigma_trials: list[SigmaSumAudit] = []
    gamma_trials: list[GammaResult] = []
    for trial in range(config.trials):
        gen = rng.stream(config.seed, "audit-sigma", trial)
        features = gen.uniform(0.0, 1.0, (config.sigma_pool_size, 2))
        lam = config.noise_grid[trial % len(config.noise_grid)]
        kernel = KernelSpec(
            lengthscale=float(gen.uniform(0.1, 0.6)),
            signal_variance=config.kernel.signal_variance,
            noise_variance=lam,
        )
        total = config.sigma_cycles * config.sigma_batch
        order = gen.permutation(config.sigma_pool_size)[:total]
        batches = [order[i * config.sigma_batch:(i + 1) * config.sigma_batch]
                   for i in range(config.sigma_cycles)]
        pool = CandidatePool(features)
        sigma_trials.append(audit_batch_sigma_sum(pool, batches, kernel))
        gamma_trials.append(
            max_information_gain_exact(features, total, kernel, lam)
        )

    bundle = build_pool(OracleSpec(family="sine1d", pool_size=config.pool_size,
                                   noise_std=0.0, seed=config.seed, sampling="grid"))
    tau = resolve_threshold(Threshold.quantile(config.mistake_tau_fraction), bundle.truth)
    all_ids = np.arange(bundle.pool.size)
    fractions = []
    mistake_total = MistakeAudit(0, 0, 0, 0, vacuous=False)
    cycles, batch_size = 5, 3
    for trial in range(config.trials):
        batches = []
        prefix: list = []
        queried: set[int] = set()
        for t in range(1, cycles + 1):
            available = np.array([g for g in all_ids if g not in queried], dtype=np.intp)
            surrogate = fit(prefix, bundle.pool, config.kernel, standardize=False)
            posterior = surrogate.predict(available)
            batch = select_poh(available, posterior, tau, batch_size,
                               rng.stream(config.seed, "audit-poh", trial, t))
            batches.append(batch)
            prefix += [(int(g), float(bundle.truth[g])) for g in batch.tolist()]
            queried.update(int(g) for g in batch.tolist())
        audit = audit_mistake_implies_uncertainty(
            bundle.pool, bundle.truth, batches, tau, config.epsilon, config.delta, config.kernel
        )
        mistake_total = MistakeAudit(
            cycles_checked=mistake_total.cycles_checked + audit.cycles_checked,
            cycles_confident=mistake_total.cycles_confident + audit.cycles_confident,
            cases=mistake_total.cases + audit.cases,
            violations=mistake_total.violations + audit.violations,
            vacuous=audit.vacuous,
        )
        fractions.append(empirical_hit_fraction(batches, bundle.truth, tau))

    hit_fraction_mean = np.mean(np.vstack(fractions), axis=0).tolist()
    betas = [beta_schedule(config.pool_size, t, config.delta) for t in range(1, cycles + 1)]
    return AuditReport(
        cdf_bound=cdf,
        sigma_sum_trials=sigma_trials,
        gamma_trials=gamma_trials,
        mistake=mistake_total,
        hit_fraction_mean=hit_fraction_mean,
        beta_values=betas,
    )
