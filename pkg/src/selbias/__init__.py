"""Selection bias of the best of K models evaluated on shared data."""

__version__ = "0.1.0"

from .increments import (FAMILIES, IncrementModel, NotPSDError, SeedSpec, cholesky_factor,
                         gaussian, sample_increments, standardize)
from .premium import (PremiumEstimate, g_gaussian_mc, g_normal, premium_enumerated, premium_exact_2,
                      premium_mc)
from .decomposition import (BoundReport, EnsembleConfig, ProfileReport, bias_concentration,
                            crude_upper_bound, decay_time, envelope_sweep, expected_max,
                            gaussian_psi, nested_premium, premium_profile, subgaussian_envelope)
from .sequential import StoppingRule, StoppedSummary, simulate_stopped, wald_check
from .hetero import MeanVector, hetero_bounds_check, optimism, per_observation_premium_curve, winners_curse
from .io import AuditReport, RunConfig, ScoreMatrix, audit, emit, load_scores, save_scores

__all__ = [
    "FAMILIES", "IncrementModel", "NotPSDError", "SeedSpec", "cholesky_factor", "gaussian",
    "sample_increments", "standardize", "PremiumEstimate", "g_gaussian_mc", "g_normal",
    "premium_enumerated", "premium_exact_2", "premium_mc", "BoundReport", "EnsembleConfig", "ProfileReport",
    "bias_concentration", "crude_upper_bound", "decay_time", "envelope_sweep", "expected_max",
    "gaussian_psi", "nested_premium", "premium_profile", "subgaussian_envelope", "StoppingRule",
    "StoppedSummary", "simulate_stopped", "wald_check", "MeanVector", "hetero_bounds_check",
    "optimism", "per_observation_premium_curve", "winners_curse", "AuditReport", "RunConfig",
    "ScoreMatrix", "audit", "emit", "load_scores", "save_scores", "__version__",
]
