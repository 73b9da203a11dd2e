"""Concentration certificates for random dynamical systems.

The library splits into four layers: ``dynamics`` simulates linear and
switched linear systems with standard-normal noise under deterministic
seeding; ``transport`` derives transport-entropy and contraction
certificates with their tail bounds; ``lyapunov`` builds exponential-moment
and drift certificates for switched systems; ``montecarlo`` verifies all of
them empirically.  The ``cli`` module wraps the pipelines behind a
declarative JSON config.
"""

from .dynamics import (
    HypothesisError,
    Predicate,
    SystemSpec,
    Trajectory,
    check_slds_hypothesis,
    derive_seed,
    load_system,
    save_system,
    simulate,
    simulate_batch,
    spectral_norm,
    system_digest,
)
from .lyapunov import (
    DriftPair,
    ExpLyapunovCertificate,
    GeometricDriftCertificate,
    HarrisMetricSpec,
    InvalidAlphaError,
    drift_from_exp_lyapunov,
    empirical_drift_check,
    harris_distance,
    minorization_beta,
    slds_exp_lyapunov,
    slds_geometric_drift,
    stein_mgf,
    te_constant,
)
from .montecarlo import (
    DeviationReport,
    NoSignalError,
    SampleBatch,
    burn_in_sampler,
    contraction_rate_fit,
    deviation_probability_experiment,
    empirical_autocovariance,
    empirical_w1,
    iid_deviation_experiment,
    lds_stationary_covariance,
    stationary_mean_reward,
)
from .transport import (
    ConcentrationCertificate,
    ContractionCertificate,
    NotContractiveError,
    T1Certificate,
    bias_term,
    bobkov_goetze_gap,
    correlation_bound,
    gaussian_w2,
    iid_deviation_bound,
    lds_certificate,
    tensorized_constant,
    trajectory_deviation_bound,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # dynamics
    "HypothesisError",
    "Predicate",
    "SystemSpec",
    "Trajectory",
    "check_slds_hypothesis",
    "derive_seed",
    "load_system",
    "save_system",
    "simulate",
    "simulate_batch",
    "spectral_norm",
    "system_digest",
    # transport
    "ConcentrationCertificate",
    "ContractionCertificate",
    "NotContractiveError",
    "T1Certificate",
    "bias_term",
    "bobkov_goetze_gap",
    "correlation_bound",
    "gaussian_w2",
    "iid_deviation_bound",
    "lds_certificate",
    "tensorized_constant",
    "trajectory_deviation_bound",
    # lyapunov
    "DriftPair",
    "ExpLyapunovCertificate",
    "GeometricDriftCertificate",
    "HarrisMetricSpec",
    "InvalidAlphaError",
    "drift_from_exp_lyapunov",
    "empirical_drift_check",
    "harris_distance",
    "minorization_beta",
    "slds_exp_lyapunov",
    "slds_geometric_drift",
    "stein_mgf",
    "te_constant",
    # montecarlo
    "DeviationReport",
    "NoSignalError",
    "SampleBatch",
    "burn_in_sampler",
    "contraction_rate_fit",
    "deviation_probability_experiment",
    "empirical_autocovariance",
    "empirical_w1",
    "iid_deviation_experiment",
    "lds_stationary_covariance",
    "stationary_mean_reward",
]
