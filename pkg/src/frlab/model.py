"""Factor regression model ``X = A Z + E``, ``y = Z'beta + eps`` at population level.

All functionals of ``Sigma_X = A Sigma_Z A' + Sigma_E`` route through the
K-dimensional signal core ``Abar = A Sigma_Z^{1/2}`` so that isotropic and
diagonal noise never require a dense ``p x p`` matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from . import linalg
from .errors import (
    ContractViolation,
    ModelDegenerateError,
    NotPSDError,
    SingularMatrixError,
    UnsupportedSizeError,
)

DENSE_CAP = 4096
INF = math.inf


def inv_or_zero(x: float) -> float:
    """``1/x`` with ``1/inf = 0``."""
    return 0.0 if math.isinf(x) else 1.0 / x


# --------------------------------------------------------------------------
# Noise covariance
# --------------------------------------------------------------------------


class NoiseCov:
    """Feature-noise covariance ``Sigma_E``.

    Subclasses cover the zero, isotropic, diagonal and dense cases; every
    method accepts a vector of length p or a ``(p, m)`` matrix.
    """

    kind = "abstract"
    is_zero = False

    def apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sqrt_apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def solve(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def opnorm(self, p: int) -> float:
        raise NotImplementedError

    def min_eig(self, p: int) -> float:
        raise NotImplementedError

    def trace(self, p: int) -> float:
        raise NotImplementedError

    def eigenvalues(self, p: int) -> np.ndarray:
        raise NotImplementedError

    def dense(self, p: int) -> np.ndarray:
        return self.apply(np.eye(p))

    @property
    def invertible(self) -> bool:
        return True

    def condition_number(self, p: int) -> float:
        lo = self.min_eig(p)
        if lo <= 0.0:
            return INF
        return self.opnorm(p) / lo

    def effective_rank(self, p: int) -> float:
        top = self.opnorm(p)
        if top <= 0.0:
            return 1.0
        return self.trace(p) / top

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroNoise(NoiseCov):
    kind = "zero"
    is_zero = True

    def apply(self, v):
        return np.zeros_like(np.asarray(v, dtype=float))

    sqrt_apply = apply

    def solve(self, v):
        raise SingularMatrixError("Sigma_E = 0 is not invertible")

    def opnorm(self, p):
        return 0.0

    def min_eig(self, p):
        return 0.0

    def trace(self, p):
        return 0.0

    def eigenvalues(self, p):
        return np.zeros(p)

    @property
    def invertible(self):
        return False

    def to_json(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class IsotropicNoise(NoiseCov):
    variance: float = 1.0
    kind = "isotropic"

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ContractViolation("isotropic noise variance must be positive")

    def apply(self, v):
        return self.variance * np.asarray(v, dtype=float)

    def sqrt_apply(self, v):
        return math.sqrt(self.variance) * np.asarray(v, dtype=float)

    def solve(self, v):
        return np.asarray(v, dtype=float) / self.variance

    def opnorm(self, p):
        return self.variance

    def min_eig(self, p):
        return self.variance

    def trace(self, p):
        return self.variance * p

    def eigenvalues(self, p):
        return np.full(p, self.variance)

    def to_json(self):
        return {"kind": "isotropic", "variance": self.variance}


@dataclass(frozen=True, eq=False)
class DiagonalNoise(NoiseCov):
    variances: np.ndarray = field(default_factory=lambda: np.ones(1))
    kind = "diagonal"

    def __post_init__(self):
        d = np.asarray(self.variances, dtype=float).ravel()
        if d.size == 0 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ContractViolation("diagonal noise variances must be positive and finite")
        d.setflags(write=False)
        object.__setattr__(self, "variances", d)

    def _scale(self, v, diag):
        v = np.asarray(v, dtype=float)
        return diag * v if v.ndim == 1 else diag[:, None] * v

    def apply(self, v):
        return self._scale(v, self.variances)

    def sqrt_apply(self, v):
        return self._scale(v, np.sqrt(self.variances))

    def solve(self, v):
        return self._scale(v, 1.0 / self.variances)

    def opnorm(self, p):
        return float(self.variances.max())

    def min_eig(self, p):
        return float(self.variances.min())

    def trace(self, p):
        return float(self.variances.sum())

    def eigenvalues(self, p):
        return np.sort(self.variances)[::-1].copy()

    def to_json(self):
        return {"kind": "diagonal", "variances": self.variances.tolist()}


@dataclass(frozen=True, eq=False)
class DenseNoise(NoiseCov):
    matrix: np.ndarray = field(default_factory=lambda: np.eye(1))
    kind = "dense"

    def __post_init__(self):
        m = linalg.as_matrix(self.matrix, "Sigma_E")
        w, v = linalg.symmetric_eigen(m)
        if w[-1] < -1e-10 * max(abs(w[0]), 1e-300):
            raise NotPSDError("dense Sigma_E is not positive semi-definite")
        w = np.clip(w, 0.0, None)
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_eig", (w, v))

    def apply(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def sqrt_apply(self, v):
        w, vec = self._eig
        v = np.asarray(v, dtype=float)
        out = vec @ (np.sqrt(w)[:, None] * (vec.T @ v.reshape(len(w), -1)))
        return out.reshape(v.shape)

    def solve(self, v):
        w, vec = self._eig
        if w[-1] <= linalg.EPS * len(w) * w[0]:
            raise SingularMatrixError("dense Sigma_E is singular")
        v = np.asarray(v, dtype=float)
        return vec @ ((vec.T @ v.reshape(len(w), -1)) / w[:, None]).reshape(v.shape)

    @property
    def invertible(self):
        w, _ = self._eig
        return bool(w[-1] > linalg.EPS * len(w) * w[0])

    def opnorm(self, p):
        return float(self._eig[0][0])

    def min_eig(self, p):
        return float(self._eig[0][-1])

    def trace(self, p):
        return float(np.trace(self.matrix))

    def eigenvalues(self, p):
        return self._eig[0].copy()

    def dense(self, p):
        return self.matrix.copy()

    def to_json(self):
        return {"kind": "dense", "matrix": self.matrix.tolist()}


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Population law of the factor regression model."""

    loading: np.ndarray
    factor_cov: np.ndarray
    noise_cov: NoiseCov
    beta: np.ndarray
    sigma_eps: float = 1.0

    def __post_init__(self):
        a = linalg.as_matrix(self.loading, "loading")
        sz = linalg.as_matrix(self.factor_cov, "factor_cov")
        b = np.asarray(self.beta, dtype=float).ravel()
        p, k = a.shape
        if sz.shape != (k, k):
            raise ContractViolation(f"factor_cov must be {k}x{k}, got {sz.shape}")
        if b.shape != (k,):
            raise ContractViolation(f"beta must have length {k}, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ContractViolation("beta contains NaN or Inf")
        if not (self.sigma_eps >= 0 and math.isfinite(self.sigma_eps)):
            raise ContractViolation("sigma_eps must be a nonnegative real")
        if isinstance(self.noise_cov, DiagonalNoise) and self.noise_cov.variances.size != p:
            raise ContractViolation("diagonal noise length differs from p")
        if isinstance(self.noise_cov, DenseNoise) and self.noise_cov.matrix.shape != (p, p):
            raise ContractViolation("dense noise shape differs from p x p")
        for arr in (a, sz, b):
            arr.setflags(write=False)
        object.__setattr__(self, "loading", a)
        object.__setattr__(self, "factor_cov", sz)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "sigma_eps", float(self.sigma_eps))
        # raises NotPSDError for an indefinite Sigma_Z
        object.__setattr__(self, "_sz_sqrt", linalg.psd_sqrt(sz))

    @property
    def p(self) -> int:
        return self.loading.shape[0]

    @property
    def K(self) -> int:
        return self.loading.shape[1]

    @cached_property
    def abar(self) -> np.ndarray:
        """``A Sigma_Z^{1/2}``."""
        if np.array_equal(self._sz_sqrt, np.eye(self.K)):
            return self.loading
        return self.loading @ self._sz_sqrt

    @cached_property
    def bbar(self) -> np.ndarray:
        """``Sigma_Z^{1/2} beta``."""
        return self._sz_sqrt @ self.beta

    @property
    def sigma_z_sqrt(self) -> np.ndarray:
        return self._sz_sqrt

    @cached_property
    def loading_gram(self) -> np.ndarray:
        """``A'A`` (K x K), the only O(p K^2) product the population functionals need."""
        g = self.loading.T @ self.loading
        return 0.5 * (g + g.T)

    @cached_property
    def abar_gram(self) -> np.ndarray:
        """``Abar' Abar = Sigma_Z^{1/2} A'A Sigma_Z^{1/2}``."""
        g = self._sz_sqrt @ self.loading_gram @ self._sz_sqrt
        return 0.5 * (g + g.T)

    @cached_property
    def signal_eigen(self) -> linalg.SymmetricEigen:
        """Eigenpairs of the K x K Gram ``Abar' Abar``."""
        w, v = linalg.symmetric_eigen(self.abar_gram)
        w = np.clip(w, 0.0, None)
        if self.K > self.p:
            w[self.p :] = 0.0
        return linalg.SymmetricEigen(w, v)

    @property
    def lambda_k_signal(self) -> float:
        """``lambda_K(A Sigma_Z A')``; zero when ``K > p``."""
        return float(self.signal_eigen.eigenvalues[-1])

    @cached_property
    def lambda_k_ata(self) -> float:
        w = linalg.symmetric_eigenvalues(self.loading_gram)
        return 0.0 if self.K > self.p else max(float(w[-1]), 0.0)

    @property
    def sigma_xy(self) -> np.ndarray:
        return self.abar @ self.bbar

    @property
    def sigma_y_sq(self) -> float:
        return float(self.bbar @ self.bbar + self.sigma_eps**2)

    def check_full_rank(self, policy: linalg.RankPolicy = linalg.DEFAULT_POLICY) -> None:
        """Raise unless ``rank(A) = rank(Sigma_Z) = K``."""
        k = self.K
        if k > self.p or linalg.numerical_rank(self.loading, policy) < k:
            raise ModelDegenerateError("rank(A) = K", f"p={self.p}, K={k}")
        if linalg.numerical_rank(self.factor_cov, policy) < k:
            raise ModelDegenerateError("rank(Sigma_Z) = K", f"K={k}")

    def with_(self, **changes) -> "FactorModel":
        kw = dict(
            loading=self.loading,
            factor_cov=self.factor_cov,
            noise_cov=self.noise_cov,
            beta=self.beta,
            sigma_eps=self.sigma_eps,
        )
        kw.update(changes)
        return FactorModel(**kw)


def _check_vec(model: FactorModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != model.p:
        raise ContractViolation(f"vector has length {v.shape[0]}, expected p={model.p}")
    return v


def sigma_x_apply(model: FactorModel, v) -> np.ndarray:
    """``Sigma_X v`` through the low-rank-plus-noise structure."""
    v = _check_vec(model, v)
    ab = model.abar
    return ab @ (ab.T @ v) + model.noise_cov.apply(v)


def sigma_x_quadform(model: FactorModel, v) -> float:
    v = _check_vec(model, v)
    s = model.abar.T @ v
    noise = v @ model.noise_cov.apply(v)
    return float(s @ s + noise)


def sigma_x_dense(model: FactorModel, *, cap: int = DENSE_CAP) -> np.ndarray:
    if model.p > cap:
        raise UnsupportedSizeError(f"dense Sigma_X with p={model.p} exceeds cap {cap}")
    ab = model.abar
    return ab @ ab.T + model.noise_cov.dense(model.p)


def sigma_x_trace(model: FactorModel) -> float:
    return float(np.sum(model.abar**2) + model.noise_cov.trace(model.p))


def _diag_plus_lowrank_top(d: np.ndarray, ab: np.ndarray) -> float:
    """Largest eigenvalue of ``diag(d) + ab ab'`` via the K x K secular equation."""
    dmax = float(d.max())
    g = ab.T @ ab
    top_g = float(linalg.symmetric_eigenvalues(0.5 * (g + g.T))[0]) if g.size else 0.0
    if top_g <= 0.0:
        return dmax

    def f(lam):
        m = ab.T @ (ab / (lam - d)[:, None])
        return float(np.linalg.eigvalsh(np.eye(ab.shape[1]) - 0.5 * (m + m.T))[0])

    hi = dmax + top_g
    if f(hi) <= 0.0:
        return hi
    lo = dmax + max(dmax, 1.0) * 1e-13
    if f(lo) >= 0.0:
        return dmax
    return float(brentq(f, lo, hi, xtol=1e-14 * hi, rtol=4 * linalg.EPS, maxiter=500))


def sigma_x_opnorm(model: FactorModel) -> float:
    noise = model.noise_cov
    top_signal = float(model.signal_eigen.eigenvalues[0])
    if noise.is_zero:
        return top_signal
    if isinstance(noise, IsotropicNoise):
        return top_signal + noise.variance
    if isinstance(noise, DiagonalNoise):
        return _diag_plus_lowrank_top(noise.variances, model.abar)
    return float(linalg.symmetric_eigenvalues(sigma_x_dense(model))[0])


class SpectrumSummary(NamedTuple):
    eigenvalues: np.ndarray  # descending, full length p
    provenance: str  # "isotropic-shift" or "dense"


def sigma_x_spectrum(model: FactorModel, *, cap: int = DENSE_CAP) -> SpectrumSummary:
    """Full eigenvalue vector of ``Sigma_X``, descending."""
    p, k = model.p, model.K
    noise = model.noise_cov
    if noise.is_zero or isinstance(noise, IsotropicNoise):
        sig = np.zeros(p)
        m = min(p, k)
        sig[:m] = model.signal_eigen.eigenvalues[:m]
        shift = 0.0 if noise.is_zero else noise.variance
        return SpectrumSummary(sig + shift, "isotropic-shift")
    w = linalg.symmetric_eigenvalues(sigma_x_dense(model, cap=cap))
    return SpectrumSummary(np.clip(w, 0.0, None), "dense")


# --------------------------------------------------------------------------
# Best linear predictor and risk
# --------------------------------------------------------------------------


def _noise_core(model: FactorModel, se_ab: np.ndarray | None = None) -> np.ndarray:
    """``Abar' Sigma_E^{-1} Abar``; reuses the cached Gram for isotropic noise."""
    noise = model.noise_cov
    if isinstance(noise, IsotropicNoise):
        return model.abar_gram / noise.variance
    if se_ab is None:
        se_ab = noise.solve(model.abar)
    core = model.abar.T @ se_ab
    return 0.5 * (core + core.T)


def best_linear_predictor(model: FactorModel, method: str = "auto") -> np.ndarray:
    """``alpha* = Sigma_X^+ Sigma_Xy``.

    ``method`` is one of ``auto``, ``noiseless``, ``woodbury``, ``dense``.
    """
    noise = model.noise_cov
    if method == "auto":
        if noise.is_zero:
            method = "noiseless"
        elif noise.invertible:
            method = "woodbury"
        else:
            method = "dense"
    if method == "noiseless":
        if not noise.is_zero:
            raise ContractViolation("noiseless path requires Sigma_E = 0")
        return linalg.pseudoinverse(model.abar).T @ model.bbar
    if method == "woodbury":
        se_ab = noise.solve(model.abar)
        gbar = np.eye(model.K) + _noise_core(model, se_ab)
        try:
            coef = sla.solve(0.5 * (gbar + gbar.T), model.bbar, assume_a="pos")
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            raise SingularMatrixError("Woodbury core matrix is singular") from exc
        return se_ab @ coef
    if method == "dense":
        return linalg.pseudoinverse(sigma_x_dense(model)) @ model.sigma_xy
    raise ContractViolation(f"unknown method {method!r}")


def risk_exact(model: FactorModel, alpha) -> float:
    """Population prediction risk ``E (X'alpha - y)^2``.

    Uses ``alpha'Sigma_E alpha + ||Abar'alpha - bbar||^2 + sigma_eps^2``,
    which equals ``alpha'Sigma_X alpha - 2 alpha'Sigma_Xy + sigma_y^2``.
    """
    alpha = _check_vec(model, alpha)
    resid = model.abar.T @ alpha - model.bbar
    noise = float(alpha @ model.noise_cov.apply(alpha))
    return float(noise + resid @ resid + model.sigma_eps**2)


def risk_exact_quadform(model: FactorModel, alpha) -> float:
    """Same risk via the expanded quadratic form (cross-check path)."""
    alpha = _check_vec(model, alpha)
    return sigma_x_quadform(model, alpha) - 2.0 * float(alpha @ model.sigma_xy) + model.sigma_y_sq


# --------------------------------------------------------------------------
# Population summary
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PopulationSummary:
    p: int
    K: int
    sigma_x_opnorm: float
    sigma_x_trace: float
    lambda_k_signal: float
    lambda_k_ata: float
    sigma_e_opnorm: float
    sigma_e_trace: float
    sigma_e_min_eig: float
    kappa_sigma_e: float
    xi: float
    re_sigma_x: float
    re_sigma_e: float
    alpha_star: np.ndarray = field(repr=False)
    alpha_star_norm_sq: float = 0.0
    alpha_star_sx_norm_sq: float = 0.0
    risk_star: float = 0.0
    oracle_risk: float = 0.0
    null_risk: float = 0.0
    beta_sz_norm_sq: float = 0.0
    gap_lower: float = 0.0
    gap_upper: float = 0.0
    sigma_e_zero: bool = False

    @property
    def inv_xi(self) -> float:
        return inv_or_zero(self.xi)


def snr(model: FactorModel) -> float:
    """``xi = lambda_K(A Sigma_Z A') / ||Sigma_E||`` (infinite when Sigma_E = 0)."""
    noise_top = model.noise_cov.opnorm(model.p)
    if noise_top == 0.0:
        return INF
    return model.lambda_k_signal / noise_top


def population_summary(model: FactorModel, *, assert_full_rank: bool = True) -> PopulationSummary:
    if assert_full_rank:
        model.check_full_rank()
    p = model.p
    noise = model.noise_cov
    alpha = best_linear_predictor(model)
    xi = snr(model)
    op = sigma_x_opnorm(model)
    tr = sigma_x_trace(model)
    beta_sq = float(model.bbar @ model.bbar)
    sig2 = model.sigma_eps**2
    risk_star = risk_exact(model, alpha)

    if noise.is_zero:
        lower = upper = 0.0
    else:
        lower, upper = 0.0, beta_sq
        if noise.invertible and model.lambda_k_signal > 0:
            core = _noise_core(model)
            try:
                val = float(model.bbar @ sla.solve(core, model.bbar, assume_a="pos"))
                upper = val
                lower = xi / (1.0 + xi) * val
            except (np.linalg.LinAlgError, sla.LinAlgError):
                pass

    return PopulationSummary(
        p=p,
        K=model.K,
        sigma_x_opnorm=op,
        sigma_x_trace=tr,
        lambda_k_signal=model.lambda_k_signal,
        lambda_k_ata=model.lambda_k_ata,
        sigma_e_opnorm=noise.opnorm(p),
        sigma_e_trace=noise.trace(p),
        sigma_e_min_eig=noise.min_eig(p),
        kappa_sigma_e=noise.condition_number(p) if not noise.is_zero else INF,
        xi=xi,
        re_sigma_x=tr / op if op > 0 else 1.0,
        re_sigma_e=noise.effective_rank(p),
        alpha_star=alpha,
        alpha_star_norm_sq=float(alpha @ alpha),
        alpha_star_sx_norm_sq=sigma_x_quadform(model, alpha),
        risk_star=risk_star,
        oracle_risk=sig2,
        null_risk=beta_sq + sig2,
        beta_sz_norm_sq=beta_sq,
        gap_lower=lower,
        gap_upper=upper,
        sigma_e_zero=noise.is_zero,
    )


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------


class ExcessDecomposition(NamedTuple):
    B1: float
    B2: float
    V1: float
    V2: float
    exact_excess: float


def excess_decomposition(model: FactorModel, X, Z, eps) -> ExcessDecomposition:
    """Bias/variance pieces of the min-norm excess risk for one replicate."""
    X = linalg.as_matrix(X, "X")
    Z = linalg.as_matrix(Z, "Z")
    eps = np.asarray(eps, dtype=float).ravel()
    n = X.shape[0]
    if X.shape[1] != model.p or Z.shape != (n, model.K) or eps.shape != (n,):
        raise ContractViolation("X, Z, eps dimensions are inconsistent with the model")
    xp = linalg.pseudoinverse(X)
    bias_vec = xp @ (Z @ model.beta)
    var_vec = xp @ eps
    szs = model.sigma_z_sqrt
    at = model.loading.T

    def e_norm(v):
        return float(np.sum(model.noise_cov.sqrt_apply(v) ** 2))

    b1 = e_norm(bias_vec)
    b2 = float(np.sum((szs @ (at @ bias_vec - model.beta)) ** 2))
    v1 = e_norm(var_vec)
    v2 = float(np.sum((szs @ (at @ var_vec)) ** 2))
    a_hat = bias_vec + var_vec
    exact = e_norm(a_hat) + float(np.sum((szs @ (at @ a_hat - model.beta)) ** 2))
    return ExcessDecomposition(b1, b2, v1, v2, exact)


class SpectrumDiagnostics(NamedTuple):
    lambda_floor_ok: bool
    lambda_k_growth: bool
    tail_bounded: bool
    eigenvalues: np.ndarray


def spectrum_diagnostics(model: FactorModel, *, cap: int = DENSE_CAP) -> SpectrumDiagnostics:
    """Check the three spectral facts about ``Sigma_X`` under the factor model."""
    w = sigma_x_spectrum(model, cap=cap).eigenvalues
    p, k = model.p, model.K
    noise = model.noise_cov
    slack = 1e-9 * max(w[0], 1.0)
    floor_ok = bool(np.all(w >= noise.min_eig(p) - slack))
    sz_min = float(linalg.symmetric_eigenvalues(model.factor_cov)[-1])
    kk = min(k, p)
    growth = bool(w[kk - 1] >= sz_min * model.lambda_k_ata - slack)
    tail_ok = bool(np.all(w[kk:] <= noise.opnorm(p) + slack))
    return SpectrumDiagnostics(floor_ok, growth, tail_ok, w)


def cluster_sizes(loading) -> np.ndarray:
    """Size of each cluster ``I_a`` of an assignment loading matrix."""
    a = linalg.as_matrix(loading, "loading")
    nz = a != 0
    if np.any(nz.sum(axis=1) > 1) or np.any(np.abs(a[nz]) != 1.0):
        raise ContractViolation("loading is not a 0/+-1 assignment matrix")
    return nz.sum(axis=0)


def cluster_snr_lower_bound(model: FactorModel) -> float:
    """``min_a |I_a| * lambda_K(Sigma_Z) / ||Sigma_E||``."""
    sizes = cluster_sizes(model.loading)
    sz_min = float(linalg.symmetric_eigenvalues(model.factor_cov)[-1])
    noise_top = model.noise_cov.opnorm(model.p)
    if noise_top == 0.0:
        return INF
    return float(sizes.min()) * sz_min / noise_top


class ResidualCheck(NamedTuple):
    max_abs_correlation: float
    identity_residual: float


def gaussian_residual_check(model: FactorModel, sample_count: int, seed: int = 0) -> ResidualCheck:
    """Empirical correlation between features and ``y - X'alpha*`` under Gaussian sampling.

    ``identity_residual`` is the relative size of ``Sigma_X alpha* - Sigma_Xy``.
    """
    from .sampling import GAUSSIAN, SeedSpec, sample_dataset

    alpha = best_linear_predictor(model)
    sxy = model.sigma_xy
    diff = sigma_x_apply(model, alpha) - sxy
    scale = max(float(np.linalg.norm(sxy)), 1.0)
    identity_residual = float(np.linalg.norm(diff)) / scale

    data = sample_dataset(model, sample_count, GAUSSIAN, SeedSpec(seed))
    eta = data.y - data.X @ alpha
    xc = data.X - data.X.mean(axis=0)
    ec = eta - eta.mean()
    denom = np.sqrt(np.sum(xc**2, axis=0) * np.sum(ec**2))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, (xc.T @ ec) / denom, 0.0)
    return ResidualCheck(float(np.max(np.abs(corr))), identity_residual)
