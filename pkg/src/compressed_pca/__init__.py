"""Compressed PCA subspace anomaly detection.

High-dimensional Gaussian observations are compressed by a Gaussian random
projection, and anomalies are flagged by the squared norm of the PCA residual
computed in the compressed space.
"""

__version__ = "0.1.0"

from .detector import (
    DetectionOutcome,
    StatisticKind,
    TestConfig,
    decide,
    q_uncompressed,
    residual_statistic,
    standardize,
)
from .errors import CompressedPCAError, DataError, NumericError, ValidationError
from .model import AnomalySpec, SpikedModel, make_spiked, sample_x
from .power import PowerKind, PowerQuery, critical_value_q, critical_value_qstar, power, power_curve
from .projection import ProjectionMatrix, generate, gram_identity_check, project
from .subspace import (
    CompressedCovariance,
    SubspaceModel,
    eigendecompose,
    eigenvalue_inflation_check,
    exact_compressed_covariance,
    sample_compressed_covariance,
)

__all__ = [
    "AnomalySpec", "CompressedCovariance", "CompressedPCAError", "DataError", "DetectionOutcome",
    "NumericError", "PowerKind", "PowerQuery", "ProjectionMatrix", "SpikedModel", "StatisticKind",
    "SubspaceModel", "TestConfig", "ValidationError", "critical_value_q", "critical_value_qstar",
    "decide", "eigendecompose", "eigenvalue_inflation_check", "exact_compressed_covariance",
    "generate", "gram_identity_check", "make_spiked", "power", "power_curve", "project",
    "q_uncompressed", "residual_statistic", "sample_compressed_covariance", "sample_x", "standardize",
]
