"""Monte Carlo sweep: grid points x replicates x estimators."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import bounds as bd
from .. import estimators as es
from ..errors import FrlabError
from ..model import FactorModel, PopulationSummary, population_summary, risk_exact
from ..sampling import NoiseLaw, SeedSpec, sample_dataset
from .config import EstimatorSpec, ExperimentConfig, GridPoint, HoldoutRisk
from .presets import build_model, loading_seed


@dataclass(frozen=True)
class SweepRow:
    design: str
    gamma: float
    K: int
    n: int
    p: int
    replicate: int
    estimator: str
    risk: float
    excess_vs_oracle: float
    excess_vs_star: float
    null_risk: float
    interp_residual: float
    coef_norm_sq: float
    converged: bool

    def sort_key(self):
        return (self.gamma, self.estimator, self.replicate, self.K, self.n, self.p)


@dataclass(frozen=True)
class BoundRow:
    gamma: float
    K: int
    n: int
    p: int
    bound_name: str
    value: float
    conditions_json: str

    def sort_key(self):
        return (self.gamma, self.K, self.n, self.p, self.bound_name)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    bound_rows: list[BoundRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def select(self, estimator: str) -> list[SweepRow]:
        return [r for r in self.rows if r.estimator == estimator]

    def mean_by_gamma(self, estimator: str, column: str = "excess_vs_oracle") -> dict[float, float]:
        groups: dict[float, list[float]] = {}
        for r in self.select(estimator):
            groups.setdefault(r.gamma, []).append(getattr(r, column))
        return {g: float(np.mean(v)) for g, v in sorted(groups.items())}


# --------------------------------------------------------------------------
# Risk evaluation
# --------------------------------------------------------------------------


def evaluate_risk(
    model: FactorModel,
    coefficients,
    eval_mode,
    seed: SeedSpec,
    *,
    latent: bool = False,
    law: NoiseLaw = NoiseLaw.GAUSSIAN,
) -> float:
    """Exact population risk, or the mean squared error over ``m`` fresh draws.

    ``latent=True`` means ``coefficients`` act on Z rather than X.
    """
    coef = np.asarray(coefficients, dtype=float)
    if isinstance(eval_mode, HoldoutRisk):
        fresh = sample_dataset(model, eval_mode.m, law, seed, stream="holdout/")
        inputs = fresh.Z if latent else fresh.X
        return float(np.mean((inputs @ coef - fresh.y) ** 2))
    if latent:
        d = model.sigma_z_sqrt @ (coef - model.beta)
        return float(d @ d + model.sigma_eps**2)
    return risk_exact(model, coef)


# --------------------------------------------------------------------------
# Estimator dispatch
# --------------------------------------------------------------------------


def _cv_grid(spec: EstimatorSpec, X, y, kind: str) -> tuple:
    if spec.cv.penalty_grid:
        return tuple(sorted(spec.cv.penalty_grid))
    if kind == "lasso":
        return es.default_lasso_grid(X, y, spec.cv.points, spec.cv.lo, spec.cv.hi)
    return es.default_ridge_grid(X, spec.cv.points, spec.cv.lo, spec.cv.hi)


def fit_estimator(spec: EstimatorSpec, model: FactorModel, data, seed: SeedSpec):
    """Returns ``(coefficients, latent, interp_residual, converged)``."""
    X, y = data.X, data.y
    n, p = X.shape
    k = min(spec.k if spec.k is not None else model.K, n, p)
    name = spec.name
    if name == "oracle_z":
        beta_hat = es.fit_oracle_z(data.Z, y)
        return beta_hat, True, float(np.linalg.norm(data.Z @ beta_hat - y)), True
    if name == "gls":
        fit = es.fit_min_norm(X, y)
    elif name == "pcr_empirical":
        fit = es.fit_pcr_empirical(X, y, k)
    elif name == "pcr_stylized":
        fit = es.fit_pcr_stylized(model, X, y, k)
    elif name == "ridge":
        fit = es.fit_ridge(X, y, spec.penalty)
    elif name == "lasso":
        fit = es.fit_lasso(X, y, spec.penalty)
    elif name == "null":
        fit = es.fit_null(p, X, y)
    elif name in ("ridge_cv", "lasso_cv"):
        kind = name[:-3]
        fold_seed = int(np.random.SeedSequence(
            seed.master_seed, spawn_key=(seed.grid_index, seed.replicate_index, 0xC5)
        ).generate_state(1)[0])
        plan = es.CvPlan(spec.cv.folds, _cv_grid(spec, X, y, kind), fold_seed)
        best = es.cross_validate(kind, X, y, plan).best_lambda
        fit = es.fit_ridge(X, y, best) if kind == "ridge" else es.fit_lasso(X, y, best)
    else:  # pragma: no cover - guarded by the config schema
        raise FrlabError(f"unknown estimator {name!r}")
    return fit.coefficients, False, fit.metadata["training_residual"], bool(fit.metadata.get("converged", True))


# --------------------------------------------------------------------------
# Sweep
# --------------------------------------------------------------------------


def _task(config: ExperimentConfig, grid_index: int, point: GridPoint, replicate: int) -> list[SweepRow]:
    seed = SeedSpec(config.master_seed, grid_index, replicate)
    gamma = point.p / point.n
    base = dict(design=config.design, gamma=gamma, K=point.K, n=point.n, p=point.p, replicate=replicate)
    nan = math.nan
    try:
        model = build_model(config, point, loading_seed(config, grid_index, replicate))
        summary = population_summary(model, assert_full_rank=False)
        law = NoiseLaw(config.noise_law)
        data = sample_dataset(model, point.n, law, seed)
    except (FrlabError, ValueError, np.linalg.LinAlgError):
        return [
            SweepRow(**base, estimator=spec.name, risk=nan, excess_vs_oracle=nan, excess_vs_star=nan,
                     null_risk=nan, interp_residual=nan, coef_norm_sq=nan, converged=False)
            for spec in config.estimators
        ]
    sig2 = model.sigma_eps**2
    rows = []
    for spec in config.estimators:
        try:
            coef, latent, resid, converged = fit_estimator(spec, model, data, seed)
            risk = evaluate_risk(model, coef, config.eval_mode, seed, latent=latent, law=law)
            norm_sq = float(coef @ coef)
        except (FrlabError, ValueError, np.linalg.LinAlgError):
            risk = resid = norm_sq = nan
            converged = False
        rows.append(
            SweepRow(**base, estimator=spec.name, risk=risk, excess_vs_oracle=risk - sig2,
                     excess_vs_star=risk - summary.risk_star, null_risk=summary.null_risk,
                     interp_residual=resid, coef_norm_sq=norm_sq, converged=converged)
        )
    return rows


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``FRLAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("FRLAB_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(int(threads), 1)


def run_sweep(config: ExperimentConfig, *, threads: int | None = None, with_bounds: bool = True) -> SweepResult:
    """Run every (grid point, replicate) task; output order is independent of scheduling."""
    points = config.grid_points()
    jobs = [(gi, pt, rep) for gi, pt in enumerate(points) for rep in range(config.replicates)]
    workers = resolve_threads(threads)
    if workers == 1:
        chunks = [_task(config, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda job: _task(config, *job), jobs))
    rows = sorted((r for chunk in chunks for r in chunk), key=SweepRow.sort_key)
    result = SweepResult(rows=rows, warnings=config.warnings())
    if with_bounds:
        result.bound_rows = compute_bounds(config)
    return result


# --------------------------------------------------------------------------
# Bounds per grid point
# --------------------------------------------------------------------------


def _bound_rows(point: GridPoint, report: bd.BoundReport) -> list[BoundRow]:
    gamma = point.p / point.n
    conds = json.dumps({k: bool(v) for k, v in report.conditions.items()}, sort_keys=True)
    out = [BoundRow(gamma, point.K, point.n, point.p, report.name, report.value, conds)]
    for term, value in sorted(report.terms.items()):
        out.append(BoundRow(gamma, point.K, point.n, point.p, f"{report.name}.{term}", float(value), conds))
    return out


def bound_reports(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> list[bd.BoundReport]:
    s = summary if summary is not None else population_summary(model, assert_full_rank=False)
    reports = [
        bd.null_ratio_bound(n, s),
        bd.effective_rank_condition(model, n, s),
        bd.main_excess_bound(model, n, s),
        bd.purevar_bound(model, n, s),
        bd.lowdim_bound(model, n, s),
        bd.pcr_bound(model, n, s),
    ]
    try:
        reports.append(bd.bartlett_bias_variance(model, n, summary=s))
    except FrlabError:
        pass
    return reports


def compute_bounds(config: ExperimentConfig) -> list[BoundRow]:
    """Bound rows for each grid point, using the replicate-0 loading."""
    rows = []
    for gi, point in enumerate(config.grid_points()):
        try:
            model = build_model(config, point, loading_seed(config, gi, 0))
        except (FrlabError, ValueError):
            continue
        for report in bound_reports(model, point.n):
            rows.extend(_bound_rows(point, report))
    return sorted(rows, key=BoundRow.sort_key)
