"""Preset configurations for the simulation figures and the null-risk regime,
plus construction of a :class:`FactorModel` from a config at one grid point."""

from __future__ import annotations

import math

import numpy as np

from .. import linalg
from ..errors import ConfigError, ContractViolation
from ..model import DenseNoise, DiagonalNoise, FactorModel, IsotropicNoise, ZeroNoise
from ..sampling import (
    SeedSpec,
    loading_canonical_sparse,
    loading_cluster_assignment,
    loading_gaussian,
    loading_scaled_orthogonal,
)
from .config import (
    BetaSpec,
    CovSpec,
    EstimatorSpec,
    ExperimentConfig,
    GridPoint,
    GridRule,
    LoadingSpec,
)

GRID_POINTS = 24
NULL_RISK_N = 50
NULL_RISK_RATIOS = (10, 50, 100)
NULL_RISK_K = 5
NULL_RISK_LOADING_SQ = 0.5

DESIGNS = ("figure1", "figure2", "figure4", "nullrisk")

_COMPARISON = [
    EstimatorSpec(name="gls"),
    EstimatorSpec(name="pcr_stylized"),
    EstimatorSpec(name="pcr_empirical"),
    EstimatorSpec(name="lasso_cv"),
    EstimatorSpec(name="ridge_cv"),
    EstimatorSpec(name="null"),
]


def preset(design: str, scale: float = 1.0) -> ExperimentConfig:
    """Config for ``figure1``, ``figure2``, ``figure4`` or ``nullrisk``.

    ``scale`` multiplies every p in the grid (K and n are unchanged).
    """
    tag = design.lower()
    if not scale > 0:
        raise ConfigError("scale must be positive")
    if tag == "figure1":
        return ExperimentConfig(
            design="Figure1",
            grid=GridRule(k_start=16, k_stop=64, points=GRID_POINTS, p_start=33, p_stop=4066, p_scale=scale),
            loading_kind=LoadingSpec(kind="scaled_orthogonal"),
            estimators=[EstimatorSpec(name="gls")],
        )
    if tag in ("figure2", "figure4"):
        loading = LoadingSpec(kind="gaussian") if tag == "figure2" else LoadingSpec(kind="canonical_sparse")
        return ExperimentConfig(
            design="Figure2" if tag == "figure2" else "Figure4",
            grid=GridRule(k_start=12, k_stop=69, points=GRID_POINTS, p_start=16, p_stop=7215, p_scale=scale),
            loading_kind=loading,
            estimators=list(_COMPARISON),
        )
    if tag == "nullrisk":
        grid = [
            GridPoint(K=NULL_RISK_K, n=NULL_RISK_N, p=max(int(round(scale * r * NULL_RISK_N)), NULL_RISK_K))
            for r in NULL_RISK_RATIOS
        ]
        return ExperimentConfig(
            design="NullRisk",
            grid=grid,
            loading_kind=LoadingSpec(kind="canonical_sparse", scale=math.sqrt(NULL_RISK_LOADING_SQ)),
            sigma_e_kind=CovSpec(kind="identity_complement"),
            estimators=[EstimatorSpec(name="gls"), EstimatorSpec(name="null")],
        )
    raise ConfigError(f"unknown preset {design!r}; expected one of {', '.join(DESIGNS)}")


# --------------------------------------------------------------------------
# Model construction
# --------------------------------------------------------------------------


def _loading(spec: LoadingSpec, p: int, k: int, seed: SeedSpec) -> np.ndarray:
    if spec.kind == "scaled_orthogonal":
        return loading_scaled_orthogonal(p, k, seed)
    if spec.kind == "gaussian":
        return loading_gaussian(p, k, seed, convention=spec.convention)
    if spec.kind == "canonical_sparse":
        return loading_canonical_sparse(p, k, spec.scale)
    if spec.kind == "cluster":
        sizes = spec.sizes if spec.sizes is not None else _balanced_sizes(p, k)
        return loading_cluster_assignment(p, k, sizes)
    if spec.matrix is None:
        raise ConfigError("custom loading needs 'matrix'")
    a = np.asarray(spec.matrix, dtype=float)
    if a.shape != (p, k):
        raise ConfigError(f"custom loading has shape {a.shape}, grid point needs {(p, k)}")
    return a


def _balanced_sizes(p: int, k: int) -> list[int]:
    base, extra = divmod(p, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def _square(spec: CovSpec, dim: int, what: str) -> np.ndarray:
    if spec.kind in ("identity", "isotropic"):
        return (1.0 if spec.kind == "identity" else spec.variance) * np.eye(dim)
    if spec.kind == "zero":
        return np.zeros((dim, dim))
    if spec.kind == "diagonal":
        if spec.values is None or len(spec.values) != dim:
            raise ConfigError(f"{what}: diagonal needs {dim} 'values'")
        return np.diag(spec.values)
    if spec.kind == "dense":
        m = np.asarray(spec.matrix if spec.matrix is not None else [], dtype=float)
        if m.shape != (dim, dim):
            raise ConfigError(f"{what}: dense matrix must be {dim}x{dim}")
        return m
    raise ConfigError(f"{what}: kind {spec.kind!r} not supported here")


def _noise(spec: CovSpec, p: int, abar: np.ndarray):
    if spec.kind == "identity":
        return IsotropicNoise(1.0)
    if spec.kind == "isotropic":
        return IsotropicNoise(spec.variance)
    if spec.kind == "zero":
        return ZeroNoise()
    if spec.kind == "diagonal":
        if spec.values is None or len(spec.values) != p:
            raise ConfigError(f"sigma_e_kind: diagonal needs {p} 'values'")
        return DiagonalNoise(np.asarray(spec.values, dtype=float))
    if spec.kind == "dense":
        return DenseNoise(_square(spec, p, "sigma_e_kind"))
    # identity_complement: I - Abar Abar'
    rows = np.flatnonzero(np.any(abar != 0, axis=1))
    sub = abar[rows]
    block = sub @ sub.T
    if np.count_nonzero(block - np.diag(np.diag(block))) == 0:
        d = np.ones(p)
        d[rows] -= np.diag(block)
        if np.any(d <= 0):
            raise ConfigError("identity_complement: loading is too large for Sigma_X = I")
        return DiagonalNoise(d)
    full = np.eye(p) - abar @ abar.T
    try:
        return DenseNoise(full)
    except ContractViolation as exc:
        raise ConfigError(f"identity_complement: {exc}") from None


def build_model(config: ExperimentConfig, point: GridPoint, seed: SeedSpec) -> FactorModel:
    """Factor model at one grid point; the loading is drawn from ``seed``."""
    p, k = point.p, point.K
    loading = _loading(config.loading_kind, p, k, seed)
    sz = _square(config.sigma_z_kind, k, "sigma_z_kind")
    if config.beta_kind.kind == "all_ones":
        beta = np.ones(k)
    else:
        if config.beta_kind.values is None or len(config.beta_kind.values) != k:
            raise ConfigError(f"beta_kind: custom needs {k} 'values'")
        beta = np.asarray(config.beta_kind.values, dtype=float)
    abar = loading @ linalg.psd_sqrt(sz)
    noise = _noise(config.sigma_e_kind, p, abar)
    return FactorModel(loading, sz, noise, beta, config.sigma_eps)


def loading_seed(config: ExperimentConfig, grid_index: int, replicate: int) -> SeedSpec:
    rep = replicate if config.redraw_loading_per_replicate else 0
    return SeedSpec(config.master_seed, grid_index, rep)
