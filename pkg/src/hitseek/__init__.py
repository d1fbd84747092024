"""Batch active learning for threshold-exceedance discovery.

A probabilistic surrogate proposes fixed-size batches of candidates under
hit-probability and competitor acquisition rules, evaluates them against
synthetic or tabular oracles, and reports hit-recovery and calibration
metrics, with a numerical audit suite for the underlying guarantees.
"""

__version__ = "0.1.0"

from .acquisition import AcquisitionSpec, STRATEGIES, hit_probability
from .campaign import CampaignConfig, CampaignResult, run_campaign, run_sweep
from .core import CandidatePool, Observation, Threshold, hit_set, resolve_threshold
from .oracle import OracleSpec, build_pool, load_tabular
from .surrogate import KernelSpec, default_kernel_grid, fit, fit_hyperparameters

__all__ = [
    "__version__",
    "AcquisitionSpec",
    "STRATEGIES",
    "hit_probability",
    "CampaignConfig",
    "CampaignResult",
    "run_campaign",
    "run_sweep",
    "CandidatePool",
    "Observation",
    "Threshold",
    "hit_set",
    "resolve_threshold",
    "OracleSpec",
    "build_pool",
    "load_tabular",
    "KernelSpec",
    "default_kernel_grid",
    "fit",
    "fit_hyperparameters",
]
