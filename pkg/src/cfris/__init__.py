"""Cell-free massive MIMO with a reconfigurable reflecting surface.

Simulate spatially correlated channel statistics, evaluate the closed-form
LMMSE aggregated-channel estimator, optimize surface phases with an
augmented adaptive differential evolution, and score configurations by
Monte Carlo uplink spectral efficiency.
"""

from .channel import (
    ChannelRealization,
    ChannelSampler,
    ChannelStatistics,
    CorrelationConfig,
    NetworkGeometry,
    PathlossConfig,
    RicianConfig,
    ScenarioConfig,
    aggregated_channel,
    generate_statistics,
)
from .errors import CfrisError, ConfigurationError, NumericalError
from .estimator import (
    EstimatorTerms,
    PilotAssignment,
    average_nmse,
    average_nmse_reference,
    error_covariance,
    estimator_terms,
    lmmse_estimate,
    nmse,
    nmse_matrix,
    received_pilot_signal,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    SeedsConfig,
    load_config,
    run_comparison,
    run_experiment,
)
from .optimizer import (
    AdeConfig,
    DeConfig,
    GaConfig,
    OptimizationResult,
    decode_phases,
    equal_phases,
    random_phases,
    run_ade,
    run_canonical_de,
    run_ga,
)
from .spectral import SeConfig, SeResult, sinr_from_samples, uplink_rates
from .validation import CheckResult, run_validation

__version__ = "0.1.0"

__all__ = [
    "AdeConfig",
    "CfrisError",
    "ChannelRealization",
    "ChannelSampler",
    "ChannelStatistics",
    "CheckResult",
    "ConfigurationError",
    "CorrelationConfig",
    "DeConfig",
    "EstimatorTerms",
    "ExperimentConfig",
    "GaConfig",
    "NetworkGeometry",
    "NumericalError",
    "OptimizationResult",
    "PathlossConfig",
    "PilotAssignment",
    "ResultRow",
    "RicianConfig",
    "ScenarioConfig",
    "SeConfig",
    "SeResult",
    "SeedsConfig",
    "aggregated_channel",
    "average_nmse",
    "average_nmse_reference",
    "decode_phases",
    "equal_phases",
    "error_covariance",
    "estimator_terms",
    "generate_statistics",
    "lmmse_estimate",
    "load_config",
    "nmse",
    "nmse_matrix",
    "random_phases",
    "received_pilot_signal",
    "run_ade",
    "run_canonical_de",
    "run_comparison",
    "run_experiment",
    "run_ga",
    "run_validation",
    "sinr_from_samples",
    "uplink_rates",
    "__version__",
]
