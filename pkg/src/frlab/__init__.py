"""Minimum-norm interpolation and its competitors under latent factor models."""

from __future__ import annotations

from .errors import (
    ConfigError,
    ContractViolation,
    FrlabError,
    ModelDegenerateError,
    NotPSDError,
    NumericFailure,
    SingularMatrixError,
    UnsupportedSizeError,
)
from .model import (
    DenseNoise,
    DiagonalNoise,
    FactorModel,
    IsotropicNoise,
    ZeroNoise,
    best_linear_predictor,
    population_summary,
    risk_exact,
)
from .sampling import NoiseLaw, SeedSpec, sample_dataset

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DenseNoise",
    "DiagonalNoise",
    "FactorModel",
    "FrlabError",
    "IsotropicNoise",
    "ModelDegenerateError",
    "NoiseLaw",
    "NotPSDError",
    "NumericFailure",
    "SeedSpec",
    "SingularMatrixError",
    "UnsupportedSizeError",
    "ZeroNoise",
    "best_linear_predictor",
    "population_summary",
    "risk_exact",
    "sample_dataset",
]
