"""Ground-truth response functions and candidate-pool synthesis.

Five synthetic families plus a tabular oracle for user-supplied
feature/response files. Noiseless truth is deterministic per (family,
dataset seed); noisy evaluations are deterministic per (family, campaign
seed, candidate id, cycle) so replays are bitwise reproducible.

Pool feature vectors are reported in unitless normalized coordinates (each
family's domain mapped onto roughly the unit cube); the response formulas
are evaluated on the family's natural domain internally.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .core import CandidatePool

FAMILIES = ("sine1d", "sine2d", "branin", "pathways", "sem", "tabular")

DEFAULT_NOISE_STD = {
    "sine1d": 0.05,
    "sine2d": 0.0,
    "branin": 0.02,
    "pathways": 0.08,
    "sem": 0.08,
    "tabular": 0.0,
}

DEFAULT_POOL_SIZE = {
    "sine1d": 500,
    "sine2d": 500,
    "branin": 500,
    "pathways": 1000,
    "sem": 1000,
}

PATHWAY_CENTERS = np.array([[0.2, 0.2], [0.8, 0.2], [0.2, 0.8], [0.8, 0.8]])
PATHWAY_GENE_SCATTER = 0.12
PATHWAY_GENE_MODULATION = 0.4

# Pre-jitter sine2d mixing weights; rows are the per-component weight vectors.
SINE2D_BASE_WEIGHTS = np.array([[0.25, -1.0 / math.pi], [0.1, 0.02]])
SINE2D_WEIGHT_JITTER_STD = 0.05

SEM_COEFFICIENTS = (1.5, 0.8, 0.4, 0.6, 0.5)


class OracleError(ValueError):
    """Invalid oracle specification or evaluation outside the domain."""


@dataclass(frozen=True)
class OracleSpec:
    """A synthetic response family with its parameters, or a tabular dataset.

    A seed of None couples the dataset realization to each campaign's seed
    (one fresh landscape per campaign); an integer pins one realization.
    """

    family: str
    pool_size: int | None = None
    noise_std: float | None = None
    seed: int | None = 0
    sampling: str = "uniform"
    n_genes: int = 50
    path: str | None = None
    feature_columns: tuple | None = None
    response_column: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise OracleError(f"unknown oracle family {self.family!r}; choose from {FAMILIES}")
        if self.pool_size is not None and self.pool_size < 1:
            raise OracleError("pool_size must be >= 1")
        if self.noise_std is not None and (self.noise_std < 0 or not math.isfinite(self.noise_std)):
            raise OracleError("noise_std must be nonnegative and finite")
        if self.sampling not in ("uniform", "grid"):
            raise OracleError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "grid" and self.family != "sine1d":
            raise OracleError("grid sampling is only supported for the sine1d family")
        if self.n_genes < 1:
            raise OracleError("n_genes must be >= 1")
        if self.family == "tabular" and self.path is None:
            raise OracleError("tabular oracle requires a path")
        if self.feature_columns is not None:
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))

    def resolved(self) -> "OracleSpec":
        """Fill in family defaults for pool size and noise."""
        pool_size = self.pool_size
        if pool_size is None and self.family != "tabular":
            pool_size = DEFAULT_POOL_SIZE[self.family]
        noise = self.noise_std if self.noise_std is not None else DEFAULT_NOISE_STD[self.family]
        return replace(self, pool_size=pool_size, noise_std=noise)


@dataclass(frozen=True)
class Sine2DParams:
    """Mixing weights (jitter baked in at construction) and phase shifts."""

    weights: np.ndarray
    phases: np.ndarray

    @staticmethod
    def from_seed(seed: int) -> "Sine2DParams":
        jitter = rng.stream(seed, "sine2d-weights").normal(0.0, SINE2D_WEIGHT_JITTER_STD, (2, 2))
        phases = rng.stream(seed, "sine2d-phases").uniform(-math.pi, math.pi, 2)
        return Sine2DParams(weights=SINE2D_BASE_WEIGHTS + jitter, phases=phases)


@dataclass(frozen=True)
class PathwaysParams:
    """Per-pathway activation amplitudes and widths, drawn once per dataset."""

    amplitudes: np.ndarray
    widths: np.ndarray
    centers: np.ndarray = PATHWAY_CENTERS

    @staticmethod
    def from_seed(seed: int) -> "PathwaysParams":
        gen = rng.stream(seed, "pathways-params")
        amplitudes = gen.uniform(0.8, 1.5, 4) * 2.5
        widths = gen.uniform(0.15, 0.25, 4)
        return PathwaysParams(amplitudes=amplitudes, widths=widths)


@dataclass(frozen=True)
class SemParams:
    """Discrete gene-embedding table for the structural-equation family."""

    gene_positions: np.ndarray

    @staticmethod
    def from_seed(seed: int, n_genes: int) -> "SemParams":
        positions = rng.stream(seed, "sem-genes").uniform(0.0, 1.0, (n_genes, 2))
        return SemParams(gene_positions=positions)


@dataclass(frozen=True)
class TabularDataset:
    """Validated feature/response table loaded from delimited text."""

    features: np.ndarray
    responses: np.ndarray
    feature_names: tuple
    response_name: str


def eval_sine1d(x, noise_rng: np.random.Generator | None = None, noise_std: float = 0.05):
    """sin(2 pi x) on [0, 1], optionally plus Gaussian noise."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise OracleError("sine1d input must lie in [0, 1]")
    y = np.sin(2.0 * math.pi * x)
    if noise_rng is not None and noise_std > 0:
        y = y + noise_rng.normal(0.0, noise_std, y.shape)
    return float(y) if y.ndim == 0 else y


def eval_sine2d(x, params: Sine2DParams):
    """Mean of two sinusoids of affinely transformed inputs on [-pi, pi]^2.

    The only randomness is the weight jitter baked into `params`; the output
    itself carries no additive noise term.
    """
    single = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(x) > math.pi + 1e-12):
        raise OracleError("sine2d input must lie in [-pi, pi]^2")
    angles = x @ params.weights.T + params.phases[None, :]
    y = np.mean(np.sin(angles), axis=1)
    return float(y[0]) if single else y


def branin_raw(x):
    """Classical Branin surface evaluated on the unit square via x1*15-5, x2*15."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if np.any(x < -1e-12) or np.any(x > 1.0 + 1e-12):
        raise OracleError("branin input must lie in [0, 1]^2")
    return branin_raw_natural(15.0 * x[:, 0] - 5.0, 15.0 * x[:, 1])


def branin_raw_natural(x1, x2):
    """Branin with canonical constants on the natural domain [-5,10] x [0,15]."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    out = a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * np.cos(x1) + s
    return float(out) if out.ndim == 0 else out


def eval_branin(x, lo: float, hi: float, noise_rng: np.random.Generator | None = None,
                noise_std: float = 0.02):
    """Inverted Branin min-max normalized by the pool constants (lo, hi).

    lo and hi are the min and max of the inverted raw surface over the
    generated pool, so the noiseless normalized range is exactly [0, 1] with
    both endpoints attained at pool points.
    """
    if hi <= lo:
        raise OracleError("branin normalization needs hi > lo")
    y = (-branin_raw(x) - lo) / (hi - lo)
    if noise_rng is not None and noise_std > 0:
        y = y + noise_rng.normal(0.0, noise_std, np.shape(y))
    return float(y) if np.ndim(y) == 0 else y


def eval_pathways(x, pathway: int, params: PathwaysParams,
                  noise_rng: np.random.Generator | None = None, noise_std: float = 0.08):
    """Pathway activation plus gene-specific and gene-context sinusoids.

    x = [g1, g2, z1, z2]; `pathway` is the index assigned to this gene when
    the pool was constructed. The activation term peaks at A_k when the
    context z sits on the pathway center.
    """
    single = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 4:
        raise OracleError("pathways input must be a 4-vector [g1, g2, z1, z2]")
    if not 0 <= pathway < params.centers.shape[0]:
        raise OracleError(f"pathway index {pathway} outside the constructed table")
    g, z = x[:, :2], x[:, 2:]
    gap = z - params.centers[pathway]
    activation = params.amplitudes[pathway] * np.exp(
        -np.sum(gap * gap, axis=1) / (2.0 * params.widths[pathway] ** 2)
    )
    gene_term = PATHWAY_GENE_MODULATION * np.sin(4 * math.pi * g[:, 0]) * np.cos(4 * math.pi * g[:, 1])
    interaction = 0.3 * np.sin(2 * math.pi * (g[:, 0] + z[:, 0])) * np.cos(2 * math.pi * (g[:, 1] + z[:, 1]))
    y = activation + gene_term + interaction
    if noise_rng is not None and noise_std > 0:
        y = y + noise_rng.normal(0.0, noise_std, y.shape)
    return float(y[0]) if single else y


def eval_sem(x, noise_rng: np.random.Generator | None = None, noise_std: float = 0.08):
    """Additive structural model over [gene, cell, environment] coordinates.

    x = [g1, g2, c1, c2, e1, e2] with c, e in [0, 1]^2.
    """
    single = np.asarray(x).ndim == 1
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 6:
        raise OracleError("sem input must be a 6-vector [g, c, e]")
    if np.any(x[:, 2:] < -1e-12) or np.any(x[:, 2:] > 1.0 + 1e-12):
        raise OracleError("sem cell/environment coordinates must lie in [0, 1]^2")
    g1, g2, c1, c2, e1, e2 = (x[:, j] for j in range(6))
    k_gene, k_cell_sin, k_cell_cos, k_env, k_inter = SEM_COEFFICIENTS
    y = (
        k_gene * np.sin(2 * math.pi * g1) * np.cos(2 * math.pi * g2)
        + k_cell_sin * np.sin(math.pi * c1)
        + k_cell_cos * np.cos(math.pi * c2)
        + k_env * np.sin(math.pi * e1) * np.cos(math.pi * e2)
        + k_inter * np.sin(math.pi * (g1 + c1)) * np.cos(math.pi * (g2 + c2))
    )
    if noise_rng is not None and noise_std > 0:
        y = y + noise_rng.normal(0.0, noise_std, y.shape)
    return float(y[0]) if single else y


class PoolBundle:
    """A constructed pool with its noiseless truth and noisy-response closure."""

    def __init__(self, spec: OracleSpec, pool: CandidatePool, truth: np.ndarray,
                 params=None, pathway_assignments: np.ndarray | None = None):
        self.spec = spec
        self.pool = pool
        self.truth = np.asarray(truth, dtype=np.float64)
        self.params = params
        self.pathway_assignments = pathway_assignments

    def noisy_response(self, candidate_id: int, cycle: int, campaign_seed: int) -> float:
        """Observed response: truth plus one per-(id, cycle) Gaussian draw."""
        value = float(self.truth[candidate_id])
        noise_std = self.spec.noise_std or 0.0
        if noise_std > 0:
            gen = rng.stream(campaign_seed, "oracle-noise", self.spec.family, candidate_id, cycle)
            value += noise_std * gen.standard_normal()
        return value


def build_pool(spec: OracleSpec) -> PoolBundle:
    """Sample N candidates for the family and evaluate the noiseless truth.

    Returns the pool (normalized features), the truth vector, and a bundle
    whose `noisy_response` closure serves observations for a campaign seed.
    """
    spec = spec.resolved()
    if spec.family == "tabular":
        return _build_tabular(spec)
    if spec.seed is None:
        raise OracleError("oracle seed is unresolved; pin it or let the campaign supply one")
    n = spec.pool_size
    gen = rng.stream(spec.seed, "pool", spec.family)

    if spec.family == "sine1d":
        if spec.sampling == "grid":
            x = np.linspace(0.0, 1.0, n)
        else:
            x = gen.uniform(0.0, 1.0, n)
        truth = eval_sine1d(x)
        return PoolBundle(spec, CandidatePool(x.reshape(-1, 1)), truth)

    if spec.family == "sine2d":
        x = gen.uniform(-math.pi, math.pi, (n, 2))
        params = Sine2DParams.from_seed(spec.seed)
        truth = eval_sine2d(x, params)
        features = (x + math.pi) / (2.0 * math.pi)
        return PoolBundle(spec, CandidatePool(features), truth, params=params)

    if spec.family == "branin":
        x = gen.uniform(0.0, 1.0, (n, 2))
        inverted = -branin_raw(x)
        lo, hi = float(inverted.min()), float(inverted.max())
        if hi <= lo:
            raise OracleError("degenerate branin pool: all raw values identical")
        truth = (inverted - lo) / (hi - lo)
        bundle = PoolBundle(spec, CandidatePool(x), truth, params={"lo": lo, "hi": hi})
        return bundle

    if spec.family == "pathways":
        params = PathwaysParams.from_seed(spec.seed)
        assignments = gen.integers(0, params.centers.shape[0], n)
        genes = params.centers[assignments] + gen.normal(0.0, PATHWAY_GENE_SCATTER, (n, 2))
        contexts = gen.uniform(0.0, 1.0, (n, 2))
        x = np.hstack([genes, contexts])
        truth = np.array([
            eval_pathways(x[i], int(assignments[i]), params) for i in range(n)
        ])
        return PoolBundle(spec, CandidatePool(x), truth, params=params,
                          pathway_assignments=assignments)

    if spec.family == "sem":
        params = SemParams.from_seed(spec.seed, spec.n_genes)
        gene_idx = gen.integers(0, spec.n_genes, n)
        genes = params.gene_positions[gene_idx]
        cells = gen.uniform(0.0, 1.0, (n, 2))
        envs = gen.uniform(0.0, 1.0, (n, 2))
        x = np.hstack([genes, cells, envs])
        truth = eval_sem(x)
        return PoolBundle(spec, CandidatePool(x), truth, params=params)

    raise OracleError(f"unhandled family {spec.family!r}")


def _build_tabular(spec: OracleSpec) -> PoolBundle:
    dataset = load_tabular(spec.path, feature_columns=spec.feature_columns,
                           response_column=spec.response_column)
    features = minmax_columns(dataset.features)
    spec = replace(spec, pool_size=dataset.responses.size)
    return PoolBundle(spec, CandidatePool(features), dataset.responses, params=dataset)


def minmax_columns(matrix: np.ndarray) -> np.ndarray:
    """Min-max normalize each column to [0, 1]; constant columns map to 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    lo = matrix.min(axis=0)
    span = matrix.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    return (matrix - lo) / safe


def load_tabular(path, feature_columns=None, response_column=None) -> TabularDataset:
    """Load a delimited text file with a header row into a validated dataset.

    Comma or tab delimiter is auto-detected from the header line. Rows with
    missing or non-numeric cells are rejected with their row index and the
    offending column name.
    """
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise OracleError(f"cannot read tabular file {path}: {exc}") from exc
    with handle:
        first = handle.readline()
        if not first:
            raise OracleError(f"{path}: empty file")
        delimiter = "\t" if "\t" in first else ","
        header = [name.strip() for name in first.rstrip("\r\n").split(delimiter)]
        reader = csv.reader(handle, delimiter=delimiter)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]

    if response_column is None:
        response_column = header[-1]
    if response_column not in header:
        raise OracleError(f"{path}: missing response column {response_column!r}")
    if feature_columns is None:
        feature_columns = tuple(name for name in header if name != response_column)
    for name in feature_columns:
        if name not in header:
            raise OracleError(f"{path}: missing feature column {name!r}")
    if len(rows) < 2:
        raise OracleError(f"{path}: need at least 2 data rows, found {len(rows)}")

    index = {name: header.index(name) for name in (*feature_columns, response_column)}
    features = np.empty((len(rows), len(feature_columns)))
    responses = np.empty(len(rows))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise OracleError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        for j, name in enumerate(feature_columns):
            features[i, j] = _parse_cell(path, row, i, name, index[name])
        responses[i] = _parse_cell(path, row, i, response_column, index[response_column])
    return TabularDataset(features=features, responses=responses,
                          feature_names=tuple(feature_columns), response_name=response_column)


def _parse_cell(path, row, row_idx, column, col_idx) -> float:
    cell = row[col_idx].strip()
    if not cell:
        raise OracleError(f"{path}: row {row_idx + 1} column {column!r} is missing")
    try:
        value = float(cell)
    except ValueError as exc:
        raise OracleError(
            f"{path}: row {row_idx + 1} column {column!r} is non-numeric: {cell!r}"
        ) from exc
    if not math.isfinite(value):
        raise OracleError(f"{path}: row {row_idx + 1} column {column!r} is non-finite")
    return value
