"""Gaussian-state security analysis, parameter estimation and bandwidth sweeps."""

from .estimation import EstimationResult, ExcessNoiseEstimator, estimate_parameters
from .gaussian import (
    check_physical,
    covariance_matrix,
    entropy,
    epr_covariance,
    g_von_neumann,
    symplectic_eigenvalues,
    symplectic_eigenvalues_numeric,
)
from .keyrate import (
    KeyRateParams,
    KeyRateReport,
    holevo_bound,
    holevo_bound_closed_form,
    infer_receiver_efficiency,
    mutual_information_heterodyne,
    params_from_measurement,
    secure_key_rate,
)
from .sweep import BandwidthCurve, sweep_bandwidth, trend_statistics

__all__ = [
    "BandwidthCurve",
    "EstimationResult",
    "ExcessNoiseEstimator",
    "KeyRateParams",
    "KeyRateReport",
    "check_physical",
    "covariance_matrix",
    "entropy",
    "epr_covariance",
    "estimate_parameters",
    "g_von_neumann",
    "holevo_bound",
    "holevo_bound_closed_form",
    "infer_receiver_efficiency",
    "mutual_information_heterodyne",
    "params_from_measurement",
    "secure_key_rate",
    "sweep_bandwidth",
    "symplectic_eigenvalues",
    "symplectic_eigenvalues_numeric",
    "trend_statistics",
]
