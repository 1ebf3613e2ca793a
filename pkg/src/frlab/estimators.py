"""Linear predictors compared under the factor regression model.

Each ``fit_*`` returns a :class:`FittedPredictor` whose ``coefficients`` live
in feature space (length p). Lasso uses the objective
``(1/2n)||y - X a||^2 + lam ||a||_1``; ridge uses the unscaled
``||y - X a||^2 + lam ||a||^2``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numba
import numpy as np
import scipy.linalg as sla
from sklearn.linear_model import lars_path

from . import linalg
from .errors import ContractViolation, SingularMatrixError, UnsupportedSizeError
from .model import DENSE_CAP, FactorModel, IsotropicNoise, sigma_x_dense

LARS_MAX_STEPS = 100_000
# homotopy columns with KKT violation above this fraction of lambda_max get refined
KKT_ACCEPT = 1e-9


class Method(str, enum.Enum):
    MIN_NORM = "gls"
    PCR_EMPIRICAL = "pcr_empirical"
    PCR_STYLIZED = "pcr_stylized"
    RIDGE = "ridge"
    LASSO = "lasso"
    NULL = "null"
    ORACLE_Z = "oracle_z"


@dataclass
class FittedPredictor:
    coefficients: np.ndarray
    method: Method
    metadata: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients


def _xy(X, y):
    X = linalg.as_matrix(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != (X.shape[0],):
        raise ContractViolation(f"y has length {y.size}, expected n={X.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ContractViolation("y contains NaN or Inf")
    return X, y


def _finish(coef, X, y, method: Method, **meta) -> FittedPredictor:
    coef = np.asarray(coef, dtype=float)
    if not np.all(np.isfinite(coef)):
        raise SingularMatrixError(f"{method.value} produced non-finite coefficients")
    meta["training_residual"] = float(np.linalg.norm(X @ coef - y))
    meta["coef_norm_sq"] = float(coef @ coef)
    return FittedPredictor(coef, method, meta)


def fit_min_norm(X, y, policy: linalg.RankPolicy = linalg.DEFAULT_POLICY) -> FittedPredictor:
    """Minimum-norm least squares ``X^+ y``."""
    X, y = _xy(X, y)
    u, s, v = linalg.svd(X)
    keep = s > policy.cutoff_for(X.shape) * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    coef = v[:, keep] @ ((u[:, keep].T @ y) / s[keep])
    return _finish(coef, X, y, Method.MIN_NORM, rank=float(keep.sum()))


def fit_null(p: int, X=None, y=None) -> FittedPredictor:
    coef = np.zeros(p)
    if X is None:
        return FittedPredictor(coef, Method.NULL, {"coef_norm_sq": 0.0})
    X, y = _xy(X, y)
    return _finish(coef, X, y, Method.NULL)


def _project_fit(X, y, basis: np.ndarray, method: Method, **meta) -> FittedPredictor:
    coef = basis @ (linalg.pseudoinverse(X @ basis) @ y)
    return _finish(coef, X, y, method, k=float(basis.shape[1]), **meta)


def empirical_principal_directions(X, k: int) -> np.ndarray:
    """Top-k eigenvectors of ``X'X/n`` (via the n x n Gram when p > n)."""
    n, p = X.shape
    if p <= n:
        _, vecs = linalg.symmetric_eigen(X.T @ X / n)
        return vecs[:, :k]
    vals, u = linalg.symmetric_eigen(X @ X.T / n)
    vals, u = vals[:k], u[:, :k]
    pos = vals > linalg.EPS * max(n, p) * max(vals[0], 0.0)
    if not np.all(pos):
        raise ContractViolation(f"X has rank below k={k}")
    basis = (X.T @ u) / np.sqrt(n * vals)
    basis, _ = linalg._fix_signs(basis)
    return basis


def fit_pcr_empirical(X, y, k: int) -> FittedPredictor:
    """PCR on the top-k sample principal directions: ``U_k (X U_k)^+ y``."""
    X, y = _xy(X, y)
    n, p = X.shape
    if not 1 <= k <= min(n, p):
        raise ContractViolation(f"k={k} must lie in [1, min(n, p)={min(n, p)}]")
    return _project_fit(X, y, empirical_principal_directions(X, k), Method.PCR_EMPIRICAL)


def population_principal_directions(model: FactorModel, k: int, *, cap: int = DENSE_CAP) -> np.ndarray:
    """Top-k eigenvectors of the population ``Sigma_X``."""
    if not 1 <= k <= model.p:
        raise ContractViolation(f"k={k} must lie in [1, p={model.p}]")
    noise = model.noise_cov
    signal_rank = int(np.sum(model.signal_eigen.eigenvalues > 0))
    if (noise.is_zero or isinstance(noise, IsotropicNoise)) and k <= min(signal_rank, model.p):
        # Sigma_X = Abar Abar' + s I shares eigenvectors with Abar Abar'
        u, s, _ = linalg.svd(model.abar)
        return u[:, :k]
    if model.p > cap:
        raise UnsupportedSizeError(f"population eigenvectors need a dense {model.p}x{model.p} matrix")
    _, vecs = linalg.symmetric_eigen(sigma_x_dense(model, cap=cap))
    return vecs[:, :k]


def fit_pcr_stylized(model: FactorModel, X, y, k: int) -> FittedPredictor:
    """PCR on the population top-k eigenvectors of ``Sigma_X``."""
    X, y = _xy(X, y)
    if X.shape[1] != model.p:
        raise ContractViolation("X column count differs from model p")
    return _project_fit(X, y, population_principal_directions(model, k), Method.PCR_STYLIZED)


def fit_ridge(X, y, lam: float) -> FittedPredictor:
    """Ridge with unscaled penalty, in whichever of the primal/dual forms is smaller."""
    X, y = _xy(X, y)
    if not lam > 0:
        raise ContractViolation("ridge penalty must be positive")
    n, p = X.shape
    try:
        if p > n:
            g = X @ X.T
            g[np.diag_indices(n)] += lam
            coef = X.T @ sla.solve(g, y, assume_a="pos")
        else:
            g = X.T @ X
            g[np.diag_indices(p)] += lam
            coef = sla.solve(g, X.T @ y, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularMatrixError("ridge system is singular") from exc
    return _finish(coef, X, y, Method.RIDGE, penalty=float(lam))


def ridge_path(X, y, lambdas) -> np.ndarray:
    """Ridge coefficients for each penalty, as columns of a p x L array."""
    X, y = _xy(X, y)
    lambdas = np.asarray(lambdas, dtype=float)
    u, s, v = linalg.svd(X)
    uty = u.T @ y
    shrink = s[:, None] / (s[:, None] ** 2 + lambdas[None, :])
    return v @ (shrink * uty[:, None])


# --------------------------------------------------------------------------
# Lasso
# --------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _cd_sweep(X, r, w, nlam, col_sq, active_only):
    n, p = X.shape
    max_change = 0.0
    for j in range(p):
        wj = w[j]
        if active_only and wj == 0.0:
            continue
        cj = col_sq[j]
        if cj == 0.0:
            w[j] = 0.0
            continue
        rho = cj * wj
        for i in range(n):
            rho += X[i, j] * r[i]
        if rho > nlam:
            new = (rho - nlam) / cj
        elif rho < -nlam:
            new = (rho + nlam) / cj
        else:
            new = 0.0
        d = new - wj
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            w[j] = new
            change = abs(d) * math.sqrt(cj)
            if change > max_change:
                max_change = change
    return max_change


@numba.njit(cache=True, nogil=True)
def _lasso_gap(X, y, r, w, lam):
    # duality gap of (1/2n)||y - Xw||^2 + lam ||w||_1
    n, p = X.shape
    xtr_max = 0.0
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * r[i]
        if abs(s) > xtr_max:
            xtr_max = abs(s)
    r2 = 0.0
    ry = 0.0
    for i in range(n):
        r2 += r[i] * r[i]
        ry += r[i] * y[i]
    l1 = 0.0
    for j in range(p):
        l1 += abs(w[j])
    if lam == 0.0:
        return xtr_max / n, xtr_max
    scale = 1.0
    if xtr_max > n * lam:
        scale = n * lam / xtr_max
    primal = 0.5 * r2 / n + lam * l1
    dual = (scale * ry - 0.5 * scale * scale * r2) / n
    return primal - dual, xtr_max


@numba.njit(cache=True, nogil=True)
def _cd_lasso(X, y, lam, w, max_iter, gap_tol, col_sq, active_sweeps):
    n, p = X.shape
    r = y.copy()
    for j in range(p):
        if w[j] != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * w[j]
    nlam = n * lam
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        _cd_sweep(X, r, w, nlam, col_sq, False)
        it += 1
        gap, _ = _lasso_gap(X, y, r, w, lam)
        if gap <= gap_tol:
            converged = True
            break
        for _ in range(active_sweeps):
            if it >= max_iter:
                break
            change = _cd_sweep(X, r, w, nlam, col_sq, True)
            it += 1
            if change * change <= 1e-3 * gap_tol * n:
                break
    return w, gap, it, converged


def lasso_kkt_residual(X, y, coef, lam: float) -> float:
    """Largest violation of the lasso optimality conditions."""
    X, y = _xy(X, y)
    n = X.shape[0]
    grad = X.T @ (y - X @ coef) / n
    nz = coef != 0
    viol = np.where(nz, np.abs(grad - lam * np.sign(coef)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _lasso_tolerance(X, y, tol: float, lam: float) -> float:
    n = X.shape[0]
    if lam == 0.0:
        # gradient-norm criterion: relative to ||y|| * max column norm / n
        scale = math.sqrt(float(y @ y)) * math.sqrt(float(np.max(np.sum(X**2, axis=0)))) / n
    else:
        scale = float(y @ y) / (2 * n)
    return tol * max(scale, np.finfo(float).tiny)


def _homotopy(X, y, lambdas) -> np.ndarray:
    """Exact piecewise-linear lasso path (LARS with the lasso modification),
    evaluated at ``lambdas`` by linear interpolation between breakpoints."""
    lambdas = np.asarray(lambdas, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alphas, _, coefs = lars_path(
            X, y, method="lasso", alpha_min=float(lambdas.min()), max_iter=LARS_MAX_STEPS, return_path=True
        )
    # alphas decrease; beyond the last breakpoint the endpoint is used (and later refined)
    out = np.empty((X.shape[1], lambdas.size))
    rev = alphas[::-1]
    for j, lam in enumerate(lambdas):
        if lam >= alphas[0]:
            out[:, j] = 0.0
            continue
        if lam <= alphas[-1]:
            out[:, j] = coefs[:, -1]
            continue
        hi = alphas.size - np.searchsorted(rev, lam, side="right")
        a0, a1 = alphas[hi - 1], alphas[hi]
        t = (a0 - lam) / (a0 - a1)
        out[:, j] = (1 - t) * coefs[:, hi - 1] + t * coefs[:, hi]
    return out


def _kkt_ok(X, y, coefs, lambdas) -> np.ndarray:
    n = X.shape[0]
    grad = X.T @ (y[:, None] - X @ coefs) / n
    lam = np.asarray(lambdas, dtype=float)[None, :]
    viol = np.where(coefs != 0, np.abs(grad - lam * np.sign(coefs)), np.maximum(np.abs(grad) - lam, 0.0))
    scale = max(float(np.max(np.abs(X.T @ y))) / n, np.finfo(float).tiny)
    return viol.max(axis=0) <= KKT_ACCEPT * scale


def fit_lasso(
    X,
    y,
    lam: float,
    *,
    tol: float = 1e-7,
    max_iter: int = 100_000,
    warm_start=None,
    active_sweeps: int = 10,
) -> FittedPredictor:
    """Cyclic coordinate descent stopped on the duality gap.

    Without ``warm_start`` the descent starts from the exact homotopy
    solution, so it usually only has to certify optimality. The gap is
    compared against ``tol * ||y||^2 / (2n)``, i.e. relative to the objective
    at zero. ``lam = 0`` uses the gradient sup-norm instead.
    """
    X, y = _xy(X, y)
    if not lam >= 0:
        raise ContractViolation("lasso penalty must be nonnegative")
    Xf = np.asfortranarray(X)
    col_sq = np.einsum("ij,ij->j", X, X)
    if warm_start is not None:
        w = np.array(warm_start, dtype=float)
    elif lam > 0 and X.size:
        w = _homotopy(X, y, [lam])[:, 0]
    else:
        w = np.zeros(X.shape[1])
    gap_tol = _lasso_tolerance(X, y, tol, lam)
    w, gap, it, converged = _cd_lasso(Xf, y, float(lam), w, int(max_iter), gap_tol, col_sq, int(active_sweeps))
    return _finish(
        w,
        X,
        y,
        Method.LASSO,
        penalty=float(lam),
        iterations=float(it),
        duality_gap=float(gap),
        converged=bool(converged),
        kkt_residual=lasso_kkt_residual(X, y, w, lam),
    )


def lasso_path(X, y, lambdas, *, tol: float = 1e-7, max_iter: int = 100_000) -> np.ndarray:
    """Lasso coefficients for each penalty (p x L).

    Taken from the exact homotopy path; any column failing the KKT check is
    refined by coordinate descent warm-started from it.
    """
    X, y = _xy(X, y)
    lambdas = np.asarray(lambdas, dtype=float)
    p = X.shape[1]
    if lambdas.size == 0:
        return np.zeros((p, 0))
    lam_max = lasso_lambda_max(X, y)
    if lam_max == 0.0:
        return np.zeros((p, lambdas.size))
    out = _homotopy(X, y, np.maximum(lambdas, 0.0))
    bad = np.flatnonzero(~_kkt_ok(X, y, out, lambdas))
    if bad.size:
        Xf = np.asfortranarray(X)
        col_sq = np.einsum("ij,ij->j", X, X)
        for idx in bad:
            lam = float(lambdas[idx])
            w, _, _, _ = _cd_lasso(Xf, y, lam, out[:, idx].copy(), int(max_iter), _lasso_tolerance(X, y, tol, lam), col_sq, 10)
            out[:, idx] = w
    return out


def lasso_lambda_max(X, y) -> float:
    """Smallest penalty at which the lasso solution is zero: ``||X'y||_inf / n``."""
    return float(np.max(np.abs(X.T @ y))) / X.shape[0]


# --------------------------------------------------------------------------
# Cross-validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    folds: int = 5
    penalty_grid: tuple = ()
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(g) for g in self.penalty_grid)
        if self.folds < 2:
            raise ContractViolation("need at least 2 folds")
        if not grid or any(not (g > 0 and math.isfinite(g)) for g in grid):
            raise ContractViolation("penalty grid must be nonempty and positive")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ContractViolation("penalty grid must be sorted ascending")
        object.__setattr__(self, "penalty_grid", grid)


def log_grid(anchor: float, points: int = 30, lo: float = 1e-4, hi: float = 1e2) -> tuple:
    anchor = max(float(anchor), np.finfo(float).tiny)
    return tuple(anchor * np.geomspace(lo, hi, points))


def default_lasso_grid(X, y, points: int = 30, lo: float = 1e-4, hi: float = 1e2) -> tuple:
    return log_grid(lasso_lambda_max(X, y), points, lo, hi)


def default_ridge_grid(X, points: int = 30, lo: float = 1e-4, hi: float = 1e2) -> tuple:
    """Anchored at the mean nonzero eigenvalue of ``X'X``."""
    X = np.asarray(X, dtype=float)
    return log_grid(float(np.sum(X**2)) / min(X.shape), points, lo, hi)


class CvResult(NamedTuple):
    best_lambda: float
    cv_curve: np.ndarray
    grid: np.ndarray


PATHS: dict[str, Callable] = {"ridge": ridge_path, "lasso": lasso_path}


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if n < folds:
        raise ContractViolation(f"{n} rows cannot be split into {folds} folds")
    perm = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed)))).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(fitter, X, y, plan: CvPlan) -> CvResult:
    """K-fold CV error per penalty; ties go to the larger penalty.

    ``fitter`` is ``"ridge"``, ``"lasso"``, a path function
    ``(X, y, lambdas) -> (p, L) array`` registered in :data:`PATHS`, or a
    callable ``(X, y, lam) -> FittedPredictor``.
    """
    X, y = _xy(X, y)
    grid = np.asarray(plan.penalty_grid, dtype=float)
    if isinstance(fitter, str):
        try:
            path = PATHS[fitter]
        except KeyError:
            raise ContractViolation(f"unknown fitter {fitter!r}") from None
    elif fitter in PATHS.values():
        path = fitter
    else:

        def path(Xt, yt, lambdas):
            return np.column_stack([fitter(Xt, yt, lam).coefficients for lam in lambdas])

    n = X.shape[0]
    errors = np.zeros((plan.folds, grid.size))
    for f, test in enumerate(fold_indices(n, plan.folds, plan.seed)):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        coefs = path(X[train], y[train], grid)
        resid = X[test] @ coefs - y[test][:, None]
        errors[f] = np.mean(resid**2, axis=0)
    curve = errors.mean(axis=0)
    best = np.flatnonzero(curve == curve.min())[-1]
    return CvResult(float(grid[best]), curve, grid)


def fit_oracle_z(Z, y) -> np.ndarray:
    """Least squares of y on the latent factors: ``Z^+ y``."""
    Z, y = _xy(Z, y)
    return linalg.pseudoinverse(Z) @ y
