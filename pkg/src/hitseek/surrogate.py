"""Exact Gaussian-process regression over a candidate pool.

Dense Cholesky conditioning only: pools in scope stay below a few thousand
candidates and a thousand training points, so sparse approximations are not
worth their complexity. Targets are standardized by default (zero prior mean
after subtracting the training mean and dividing by the training std); all
predictions are reported back in original response units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import CandidatePool, Observation

SIGMA_FLOOR = 1e-9

# Jitter escalation: starting fraction of signal variance and the cap, in
# decades. Raw factorization is attempted first.
_JITTER_START = 1e-10
_JITTER_STOP = 1e-4


class SurrogateError(RuntimeError):
    """Gram or posterior covariance matrix not factorizable after max jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel hyperparameters plus observation-noise variance.

    `lengthscale` is either a positive scalar (isotropic) or a tuple with one
    positive entry per feature dimension.
    """

    lengthscale: float | tuple
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    family: str = "rbf"

    def __post_init__(self):
        if self.family != "rbf":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        scales = np.atleast_1d(np.asarray(self.lengthscale, dtype=np.float64))
        if scales.size == 0 or np.any(scales <= 0) or not np.all(np.isfinite(scales)):
            raise ValueError("lengthscale entries must be positive and finite")
        if not (self.signal_variance > 0 and math.isfinite(self.signal_variance)):
            raise ValueError("signal_variance must be positive")
        if self.noise_variance < 0 or not math.isfinite(self.noise_variance):
            raise ValueError("noise_variance must be nonnegative")
        if isinstance(self.lengthscale, (list, np.ndarray)):
            object.__setattr__(self, "lengthscale", tuple(float(s) for s in scales))

    def lengthscale_vector(self, dimension: int) -> np.ndarray:
        scales = np.atleast_1d(np.asarray(self.lengthscale, dtype=np.float64))
        if scales.size == 1:
            return np.full(dimension, float(scales[0]))
        if scales.size != dimension:
            raise ValueError(
                f"lengthscale has {scales.size} entries but features have dimension {dimension}"
            )
        return scales

    def as_dict(self) -> dict:
        ls = self.lengthscale
        return {
            "family": self.family,
            "lengthscale": list(ls) if isinstance(ls, tuple) else float(ls),
            "signal_variance": float(self.signal_variance),
            "noise_variance": float(self.noise_variance),
        }


@dataclass(frozen=True)
class PosteriorSummary:
    """Per-candidate predictive mean and standard deviation."""

    means: np.ndarray
    stddevs: np.ndarray


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """RBF Gram matrix k(a, b) = signal * exp(-0.5 * ||(a-b)/lengthscale||^2)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    scales = spec.lengthscale_vector(a.shape[1])
    sa = a / scales
    sb = sa if b is None else np.atleast_2d(np.asarray(b, dtype=np.float64)) / scales
    d2 = np.sum(sa * sa, axis=1)[:, None] + np.sum(sb * sb, axis=1)[None, :] - 2.0 * sa @ sb.T
    np.clip(d2, 0.0, None, out=d2)
    return spec.signal_variance * np.exp(-0.5 * d2)


def _cholesky_with_jitter(matrix: np.ndarray, signal_variance: float):
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Returns (L, jitter). Tries the raw matrix first, then adds
    signal_variance * 1e-10 to the diagonal, multiplying by 10 up to
    signal_variance * 1e-4 before giving up.
    """
    try:
        return np.linalg.cholesky(matrix), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(matrix.shape[0])
    jitter = _JITTER_START * signal_variance
    while jitter <= _JITTER_STOP * signal_variance * (1 + 1e-12):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SurrogateError(
        "Gram matrix is not positive definite even after maximum jitter; "
        "check for duplicated inputs with zero noise or a degenerate kernel"
    )


class FittedSurrogate:
    """GP conditioned on the labeled history of one candidate pool.

    Immutable after construction; `predict` and `sample_joint` are pure and
    safe to call concurrently.
    """

    def __init__(
        self,
        kernel: KernelSpec,
        pool: CandidatePool,
        train_ids: np.ndarray,
        train_targets: np.ndarray,
        *,
        standardize: bool = True,
        sigma_floor: float = SIGMA_FLOOR,
    ):
        self.kernel = kernel
        self.pool = pool
        self.sigma_floor = float(sigma_floor)
        self.standardize = bool(standardize)
        self.train_ids = np.asarray(train_ids, dtype=np.intp)
        self.train_targets = np.asarray(train_targets, dtype=np.float64)
        self._x = pool.features[self.train_ids] if self.train_ids.size else np.empty((0, pool.dimension))

        if self.standardize and self.train_targets.size:
            self._y_loc = float(np.mean(self.train_targets))
            spread = float(np.std(self.train_targets))
            self._y_scale = spread if spread > 0 else 1.0
        else:
            self._y_loc, self._y_scale = 0.0, 1.0
        y = (self.train_targets - self._y_loc) / self._y_scale

        if self.train_ids.size:
            gram = kernel_matrix(kernel, self._x)
            gram[np.diag_indices_from(gram)] += kernel.noise_variance
            self._chol, self.jitter = _cholesky_with_jitter(gram, kernel.signal_variance)
            self._alpha = cho_solve((self._chol, True), y)
            self._log_marginal = float(
                -0.5 * y @ self._alpha
                - np.sum(np.log(np.diag(self._chol)))
                - 0.5 * y.size * math.log(2.0 * math.pi)
            )
        else:
            self._chol = None
            self._alpha = None
            self.jitter = 0.0
            self._log_marginal = 0.0

    @property
    def n_train(self) -> int:
        return int(self.train_ids.size)

    @property
    def log_marginal_likelihood(self) -> float:
        """Exact Gaussian log evidence of the (standardized) training targets."""
        return self._log_marginal

    def predict(self, query_ids) -> PosteriorSummary:
        """Predictive marginals N(mu, sigma^2) for a subset of pool ids.

        With an empty history this is the prior: mean 0 and variance equal to
        the signal variance. Standard deviations are clamped below by the
        sigma floor so downstream z-scores stay finite.
        """
        mean, var = self._marginals(self._query_features(query_ids))
        mean = mean * self._y_scale + self._y_loc
        sigma = np.sqrt(np.clip(var, 0.0, None)) * self._y_scale
        return PosteriorSummary(means=mean, stddevs=np.maximum(sigma, self.sigma_floor))

    def joint_posterior(self, query_ids):
        """Posterior mean vector and dense covariance over the queried ids."""
        xq = self._query_features(query_ids)
        prior = kernel_matrix(self.kernel, xq)
        if self._chol is None:
            mean = np.zeros(xq.shape[0])
            cov = prior
        else:
            cross = kernel_matrix(self.kernel, self._x, xq)
            v = solve_triangular(self._chol, cross, lower=True)
            mean = cross.T @ self._alpha
            cov = prior - v.T @ v
        cov = 0.5 * (cov + cov.T)
        return mean * self._y_scale + self._y_loc, cov * self._y_scale**2

    def sample_joint(self, query_ids, rng: np.random.Generator, draws: int = 1) -> np.ndarray:
        """Draw from the joint posterior Gaussian over the queried candidates.

        Returns shape (m,) for draws == 1, else (draws, m). Uses the Cholesky
        factor of the posterior covariance with the same jitter escalation as
        fitting; bitwise deterministic for a fixed stream.
        """
        query_ids = np.asarray(query_ids, dtype=np.intp)
        if query_ids.size == 0:
            raise ValueError("query set is empty")
        mean, cov = self.joint_posterior(query_ids)
        factor, _ = _cholesky_with_jitter(cov, self.kernel.signal_variance * self._y_scale**2)
        z = rng.standard_normal((draws, query_ids.size))
        samples = mean[None, :] + z @ factor.T
        return samples[0] if draws == 1 else samples

    def _query_features(self, query_ids) -> np.ndarray:
        query_ids = np.asarray(query_ids, dtype=np.intp)
        if query_ids.size and (query_ids.min() < 0 or query_ids.max() >= self.pool.size):
            raise KeyError("query ids outside the fitted pool")
        return self.pool.features[query_ids]

    def _marginals(self, xq: np.ndarray):
        prior_var = np.full(xq.shape[0], self.kernel.signal_variance)
        if self._chol is None:
            return np.zeros(xq.shape[0]), prior_var
        cross = kernel_matrix(self.kernel, self._x, xq)
        v = solve_triangular(self._chol, cross, lower=True)
        return cross.T @ self._alpha, prior_var - np.sum(v * v, axis=0)


def fit(
    history,
    pool: CandidatePool,
    kernel: KernelSpec,
    *,
    standardize: bool = True,
    sigma_floor: float = SIGMA_FLOOR,
) -> FittedSurrogate:
    """Condition the GP on observed (candidate, response) pairs.

    An empty history yields the prior. Raises SurrogateError if the noisy
    Gram matrix cannot be factorized even after jitter escalation.
    """
    ids, targets = _history_arrays(history)
    _ = kernel.lengthscale_vector(pool.dimension)
    return FittedSurrogate(
        kernel, pool, ids, targets, standardize=standardize, sigma_floor=sigma_floor
    )


def fit_hyperparameters(history, pool: CandidatePool, grid, *, standardize: bool = True) -> KernelSpec:
    """Pick the grid element maximizing the exact log marginal likelihood.

    Ties keep the earliest grid element. Grid entries whose Gram matrix fails
    to factorize are skipped; if all fail, SurrogateError propagates.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    ids, _ = _history_arrays(history)
    if ids.size < 2:
        raise ValueError("hyperparameter selection needs at least 2 observations")
    best_spec, best_lml, last_error = None, -np.inf, None
    for spec in grid:
        try:
            candidate = fit(history, pool, spec, standardize=standardize)
        except SurrogateError as exc:
            last_error = exc
            continue
        if candidate.log_marginal_likelihood > best_lml:
            best_spec, best_lml = spec, candidate.log_marginal_likelihood
    if best_spec is None:
        raise SurrogateError(f"every grid entry failed to factorize: {last_error}")
    return best_spec


def default_kernel_grid(dimension: int) -> tuple:
    """Default search grid: lengthscales scaled by sqrt(d) over unit-cube data."""
    root_d = math.sqrt(dimension)
    return tuple(
        KernelSpec(lengthscale=ls * root_d, signal_variance=1.0, noise_variance=nv)
        for ls in (0.05, 0.1, 0.2, 0.5, 1.0)
        for nv in (1e-4, 1e-2, 1e-1)
    )


def _history_arrays(history):
    ids, targets = [], []
    for obs in history:
        if isinstance(obs, Observation):
            ids.append(obs.candidate_id)
            targets.append(obs.response)
        else:
            g, y = obs
            ids.append(int(g))
            targets.append(float(y))
    return np.asarray(ids, dtype=np.intp), np.asarray(targets, dtype=np.float64)
