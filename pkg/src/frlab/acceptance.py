"""Acceptance suite: eleven end-to-end checks, each returning a pass flag and detail.

Shared by ``tests/test_acceptance.py`` and the ``frlab check`` subcommand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds as bd
from . import estimators as es
from . import linalg
from .model import (
    DenseNoise,
    DiagonalNoise,
    FactorModel,
    IsotropicNoise,
    ZeroNoise,
    best_linear_predictor,
    population_summary,
    risk_exact,
    sigma_x_apply,
)
from .sampling import GAUSSIAN, SeedSpec, loading_canonical_sparse, loading_gaussian, sample_dataset

NOISELESS_CONSTANT = 3.0
BOUND_FIT_SLACK = 3.0
BOUND_FIT_MIN_GAMMA = 2.0
KSTAR_MIN_GAMMA = 4.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s) {self.detail}"


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny))


# --------------------------------------------------------------------------
# 1. Pseudoinverse identities
# --------------------------------------------------------------------------


def random_low_rank(rng: np.random.Generator, m: int, n: int, r: int, floor: float = 1e-2) -> np.ndarray:
    """Rank-r matrix with random singular subspaces and singular values log-uniform in [floor, 1]."""
    u = np.linalg.qr(rng.standard_normal((m, r)))[0]
    v = np.linalg.qr(rng.standard_normal((n, r)))[0]
    s = np.exp(rng.uniform(math.log(floor), 0.0, r))
    return (u * s) @ v.T


def pinv_errors(a: np.ndarray) -> dict[str, float]:
    """Relative residuals of the four Moore-Penrose conditions."""
    ap = linalg.pseudoinverse(a)
    return {
        "AXA=A": _rel(a @ ap @ a, a),
        "XAX=X": _rel(ap @ a @ ap, ap),
        "(AX)'=AX": _rel((a @ ap).T, a @ ap),
        "(XA)'=XA": _rel((ap @ a).T, ap @ a),
    }


def criterion_1(count: int = 200, seed: int = 1) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_name = ""
    for _ in range(count):
        m, n = (int(x) for x in rng.integers(1, 61, size=2))
        r = int(rng.integers(1, min(m, n) + 1))
        a = random_low_rank(rng, m, n, r)
        errs = pinv_errors(a)
        # (BC)^+ = (B^+ B C)^+ (B C C^+)^+ with B = A and a random conformable C
        k = int(rng.integers(1, 61))
        b = a
        c = random_low_rank(rng, n, k, int(rng.integers(1, min(n, k) + 1)))
        lhs = linalg.pseudoinverse(b @ c)
        rhs = linalg.pseudoinverse(linalg.pseudoinverse(b) @ b @ c) @ linalg.pseudoinverse(b @ c @ linalg.pseudoinverse(c))
        errs["(BC)^+"] = _rel(rhs, lhs)
        s = np.linalg.svd(a, compute_uv=False)
        errs["||A^+||"] = abs(linalg.operator_norm(linalg.pseudoinverse(a)) * s[r - 1] - 1.0)
        name, val = max(errs.items(), key=lambda kv: kv[1])
        if val > worst:
            worst, worst_name = val, name
    return worst <= 1e-8, f"worst relative error {worst:.2e} ({worst_name}) over {count} matrices"


# --------------------------------------------------------------------------
# 2. Exact risk vs Monte Carlo
# --------------------------------------------------------------------------


def random_small_model(rng: np.random.Generator, p: int, k: int, noise: str = "diagonal") -> FactorModel:
    a = rng.standard_normal((p, k))
    l = rng.standard_normal((k, k))
    sz = l @ l.T / k + 0.5 * np.eye(k)
    if noise == "zero":
        se = ZeroNoise()
    elif noise == "isotropic":
        se = IsotropicNoise(float(rng.uniform(0.5, 2.0)))
    elif noise == "dense":
        m = rng.standard_normal((p, p))
        se = DenseNoise(m @ m.T / p + 0.3 * np.eye(p))
    else:
        se = DiagonalNoise(rng.uniform(0.3, 2.0, size=p))
    beta = rng.standard_normal(k)
    return FactorModel(a, sz, se, beta, float(rng.uniform(0.5, 1.5)))


def monte_carlo_risk(model: FactorModel, alpha, samples: int, seed: int, chunk: int = 250_000) -> tuple[float, float]:
    """Mean of ``(X'alpha - y)^2`` and its standard error."""
    total = total_sq = 0.0
    done = 0
    idx = 0
    while done < samples:
        m = min(chunk, samples - done)
        d = sample_dataset(model, m, GAUSSIAN, SeedSpec(seed, 0, idx))
        sq = (d.X @ alpha - d.y) ** 2
        total += float(sq.sum())
        total_sq += float((sq**2).sum())
        done += m
        idx += 1
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    return mean, math.sqrt(var / samples)


def criterion_2(models: int = 20, samples: int = 2_000_000, seed: int = 2) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    kinds = ("diagonal", "isotropic", "dense", "zero")
    for i in range(models):
        p, k = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        model = random_small_model(rng, p, k, kinds[i % len(kinds)])
        alpha = rng.standard_normal(p) / math.sqrt(p)
        exact = risk_exact(model, alpha)
        mean, se = monte_carlo_risk(model, alpha, samples, seed * 1000 + i)
        worst = max(worst, abs(mean - exact) / se)
    return worst <= 3.0, f"largest |MC - exact| = {worst:.2f} SE over {models} models"


# --------------------------------------------------------------------------
# 3. Best-linear-predictor identities
# --------------------------------------------------------------------------


def criterion_3(models: int = 20, seed: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    bracket_ok = True
    for i in range(models):
        p = int(rng.integers(5, 201))
        k = int(rng.integers(1, min(p, 10) + 1))
        model = random_small_model(rng, p, k, ("diagonal", "isotropic", "dense")[i % 3])
        s = population_summary(model)
        alpha = s.alpha_star
        worst = max(worst, _rel(sigma_x_apply(model, alpha), model.sigma_xy))
        gain = risk_exact(model, np.zeros(p)) - s.risk_star
        worst = max(worst, abs(gain - s.alpha_star_sx_norm_sq) / max(abs(gain), 1e-300))
        worst = max(worst, _rel(best_linear_predictor(model, "dense"), best_linear_predictor(model, "woodbury")))
        gap = s.risk_star - model.sigma_eps**2
        tol = 1e-9 * max(s.gap_upper, 1.0)
        bracket_ok &= s.gap_lower - tol <= gap <= s.gap_upper + tol
        bracket_ok &= s.gap_upper <= s.beta_sz_norm_sq * s.inv_xi * (1 + 1e-9) + 1e-12
    ok = worst <= 1e-8 and bracket_ok
    return ok, f"worst relative residual {worst:.2e}; benchmark bracket {'holds' if bracket_ok else 'violated'}"


# --------------------------------------------------------------------------
# 4. Noiseless equivalence
# --------------------------------------------------------------------------


def noiseless_model(p: int, k: int, seed: int) -> FactorModel:
    return FactorModel(loading_gaussian(p, k, SeedSpec(seed)), np.eye(k), ZeroNoise(), np.ones(k), 1.0)


def criterion_4(replicates: int = 20, k: int = 8, n: int = 256, p: int = 512, seed: int = 4) -> tuple[bool, str]:
    limit = NOISELESS_CONSTANT * k * math.log(n) / n
    worst_pred = 0.0
    worst_excess = 0.0
    for rep in range(replicates):
        model = noiseless_model(p, k, seed * 1000 + rep)
        spec = SeedSpec(seed, 0, rep)
        d = sample_dataset(model, n, GAUSSIAN, spec)
        fresh = sample_dataset(model, n, GAUSSIAN, spec, stream="fresh/")
        gls = es.fit_min_norm(d.X, d.y).coefficients
        pcr = es.fit_pcr_empirical(d.X, d.y, k).coefficients
        beta_hat = es.fit_oracle_z(d.Z, d.y)
        for X, Z in ((d.X, d.Z), (fresh.X, fresh.Z)):
            preds = (X @ gls, X @ pcr, Z @ beta_hat)
            for i in range(3):
                for j in range(i + 1, 3):
                    worst_pred = max(worst_pred, _rel(preds[i], preds[j]))
        worst_excess = max(worst_excess, risk_exact(model, gls) - model.sigma_eps**2)
    ok = worst_pred <= 1e-8 and worst_excess <= limit
    return ok, f"prediction mismatch {worst_pred:.2e}; max excess {worst_excess:.4f} vs limit {limit:.4f}"


# --------------------------------------------------------------------------
# 5. Interpolation
# --------------------------------------------------------------------------


def criterion_5(replicates: int = 20, n: int = 50, ratio: int = 20, k: int = 5, seed: int = 5) -> tuple[bool, str]:
    p = ratio * n
    worst = 0.0
    for rep in range(replicates):
        model = FactorModel(loading_gaussian(p, k, SeedSpec(seed, 0, rep)), np.eye(k), IsotropicNoise(1.0), np.ones(k))
        d = sample_dataset(model, n, GAUSSIAN, SeedSpec(seed, 1, rep))
        fit = es.fit_min_norm(d.X, d.y)
        worst = max(worst, fit.metadata["training_residual"] / np.linalg.norm(d.y))
    return worst <= 1e-8, f"max ||X a - y|| / ||y|| = {worst:.2e} at p = {p}, n = {n}"


# --------------------------------------------------------------------------
# 6. Null-risk convergence
# --------------------------------------------------------------------------


def null_risk_medians(result) -> dict[int, float]:
    ratios: dict[int, list[float]] = {}
    for r in result.select("gls"):
        ratios.setdefault(r.p, []).append(abs(r.risk / r.null_risk - 1.0))
    return {p: float(np.median(v)) for p, v in sorted(ratios.items())}


def criterion_6(threads: int | None = None) -> tuple[bool, str]:
    from .experiments.presets import preset
    from .experiments.sweep import run_sweep

    config = preset("nullrisk")
    result = run_sweep(config, threads=threads, with_bounds=False)
    medians = null_risk_medians(result)
    n = config.grid_points()[0].n
    below = all(m < 5 * math.sqrt(n / p) for p, m in medians.items())
    values = list(medians.values())
    monotone = all(b < a for a, b in zip(values, values[1:]))
    detail = ", ".join(f"p={p}: {m:.4f} (limit {5 * math.sqrt(n / p):.3f})" for p, m in medians.items())
    return below and monotone, detail + ("" if monotone else "; not decreasing")


# --------------------------------------------------------------------------
# 7-9. Figures
# --------------------------------------------------------------------------


def _means(result, estimator: str) -> tuple[np.ndarray, np.ndarray]:
    m = result.mean_by_gamma(estimator)
    return np.array(list(m.keys())), np.array(list(m.values()))


def check_double_descent(result) -> tuple[bool, str]:
    gammas, means = _means(result, "gls")
    peak = int(np.argmin(np.abs(gammas - 1.0)))
    ratio = means[peak] / means[-1]
    tail = means[-3:]
    decreasing = bool(np.all(np.diff(tail) < 0))
    ok = ratio > 10 and decreasing
    return ok, (
        f"excess at gamma={gammas[peak]:.3f}: {means[peak]:.3f}; at gamma={gammas[-1]:.3f}: {means[-1]:.4f} "
        f"(ratio {ratio:.1f}); last three {np.array2string(tail, precision=4)}"
    )


def check_dense_comparison(result) -> tuple[bool, str]:
    last = {e: _means(result, e)[1][-1] for e in ("gls", "pcr_stylized", "ridge_cv", "lasso_cv")}
    gls = last["gls"]
    pcr_ok = last["pcr_stylized"] / 2 <= gls <= 2 * last["pcr_stylized"]
    ridge_ok = gls / 2 <= last["ridge_cv"] <= 2 * gls
    lasso_ok = last["lasso_cv"] >= 1.5 * gls
    detail = ", ".join(f"{k}={v:.4f}" for k, v in last.items())
    return pcr_ok and ridge_ok and lasso_ok, f"largest gamma: {detail}"


def check_sparse_comparison(result) -> tuple[bool, str]:
    names = ("gls", "pcr_stylized", "pcr_empirical", "ridge_cv", "lasso_cv")
    last = {e: _means(result, e)[1][-1] for e in names}
    null_excess = _means(result, "null")[1][-1]
    lasso_ok = last["lasso_cv"] <= last["gls"]
    below = all(v * 10 <= null_excess for v in last.values())
    detail = ", ".join(f"{k}={v:.4f}" for k, v in last.items())
    return lasso_ok and below, f"largest gamma: {detail}, null={null_excess:.3f}"


def _figure(design: str, threads: int | None):
    from .experiments.presets import preset
    from .experiments.sweep import run_sweep

    return run_sweep(preset(design, scale=0.5), threads=threads, with_bounds=False)


def criterion_7(threads: int | None = None):
    return check_double_descent(_figure("figure1", threads))


def criterion_8(threads: int | None = None):
    return check_dense_comparison(_figure("figure2", threads))


def criterion_9(threads: int | None = None):
    return check_sparse_comparison(_figure("figure4", threads))


# --------------------------------------------------------------------------
# 10. Bound regime consistency
# --------------------------------------------------------------------------


def bound_fit(result, config) -> dict:
    """Fit ``C = measured / bound`` at the largest gamma and test all points with
    ``gamma >= BOUND_FIT_MIN_GAMMA`` for ``measured <= BOUND_FIT_SLACK * C * bound``."""
    from .experiments.presets import build_model, loading_seed

    means = result.mean_by_gamma("gls")
    rows = []
    kstar_ok = sandwich_ok = True
    for gi, point in enumerate(config.grid_points()):
        gamma = point.p / point.n
        model = build_model(config, point, loading_seed(config, gi, 0))
        summary = population_summary(model, assert_full_rank=False)
        bound = bd.main_excess_bound(model, point.n, summary).value
        rows.append((gamma, means[gamma], bound))
        check = bd.kstar_sandwich_check(model, point.n, summary=summary)
        sandwich_ok &= check.upper_ok and check.lower_ok
        if gamma >= KSTAR_MIN_GAMMA:
            spectrum = bd.sigma_x_spectrum(model)
            kstar_ok &= bd.bartlett_kstar(spectrum, point.n) == point.K
    eligible = [r for r in rows if r[0] >= BOUND_FIT_MIN_GAMMA]
    g_fit, m_fit, b_fit = max(eligible)
    constant = m_fit / b_fit
    worst = max(m / (constant * b) for _, m, b in eligible)
    return {
        "constant": constant,
        "worst_ratio": worst,
        "points": len(eligible),
        "kstar_ok": kstar_ok,
        "sandwich_ok": sandwich_ok,
        "kstar_points": sum(r[0] >= KSTAR_MIN_GAMMA for r in rows),
    }


def criterion_10(threads: int | None = None) -> tuple[bool, str]:
    from .experiments.presets import preset
    from .experiments.sweep import run_sweep

    config = preset("figure1")
    fit = bound_fit(run_sweep(config, threads=threads, with_bounds=False), config)
    ok = fit["worst_ratio"] <= BOUND_FIT_SLACK and fit["kstar_ok"] and fit["sandwich_ok"] and fit["kstar_points"] > 0
    return ok, (
        f"C = {fit['constant']:.3f}; worst measured/(C bound) = {fit['worst_ratio']:.2f} over {fit['points']} points; "
        f"sandwich {'ok' if fit['sandwich_ok'] else 'FAILED'}; K* = K on {fit['kstar_points']} points: "
        f"{'ok' if fit['kstar_ok'] else 'FAILED'}"
    )


# --------------------------------------------------------------------------
# 11. Divergence of the two bias bounds
# --------------------------------------------------------------------------


def table_two_model(n: int, p_ratio: int = 4) -> FactorModel:
    """``Sigma_E = I``, ``A = sqrt(p) [e_1..e_K]`` so ``xi = p``; ``beta = 1`` so ``||beta||^2 = K``."""
    k = int(math.floor(n**0.75))
    p = p_ratio * n
    return FactorModel(loading_canonical_sparse(p, k), np.eye(k), IsotropicNoise(1.0), np.ones(k))


def table_two_biases(ns=(256, 1024, 4096)) -> list[tuple[int, float, float]]:
    out = []
    for n in ns:
        model = table_two_model(n)
        s = population_summary(model, assert_full_rank=False)
        bart = bd.bartlett_bias_variance(model, n, summary=s).terms["bias"]
        main = bd.main_excess_bound(model, n, s).terms["bias"]
        out.append((n, bart, main))
    return out


def criterion_11() -> tuple[bool, str]:
    vals = table_two_biases()
    bart = [v[1] for v in vals]
    main = [v[2] for v in vals]
    ok = all(b2 > b1 for b1, b2 in zip(bart, bart[1:])) and all(m2 < m1 for m1, m2 in zip(main, main[1:]))
    detail = "; ".join(f"n={n}: Bartlett {b:.2f}, main {m:.4f}" for n, b, m in vals)
    return ok, detail


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("pseudoinverse identities", criterion_1),
    2: ("exact risk vs Monte Carlo", criterion_2),
    3: ("best linear predictor identities", criterion_3),
    4: ("noiseless equivalence", criterion_4),
    5: ("interpolation", criterion_5),
    6: ("null-risk convergence", criterion_6),
    7: ("double descent (figure 1, scale 0.5)", criterion_7),
    8: ("dense comparison (figure 2, scale 0.5)", criterion_8),
    9: ("sparse comparison (figure 4, scale 0.5)", criterion_9),
    10: ("bound regime consistency", criterion_10),
    11: ("bias bound divergence", criterion_11),
}

# stated wall-clock budget per criterion, in seconds
BUDGET_SECONDS = {1: 10, 2: 60, 3: 10, 4: 30, 5: 30, 6: 120, 7: 300, 8: 900, 9: 900, 10: 300, 11: 1}

_THREADED = {6, 7, 8, 9, 10}


def run_criterion(number: int, threads: int | None = None) -> CriterionResult:
    """Run one criterion; exceeding its time budget counts as a failure."""
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    passed, detail = fn(threads=threads) if number in _THREADED else fn()
    seconds = time.perf_counter() - start
    budget = BUDGET_SECONDS[number]
    if seconds > budget:
        passed = False
        detail += f"; over the {budget}s budget"
    return CriterionResult(number, title, bool(passed), detail, seconds)


def run_all(threads: int | None = None, numbers=None) -> list[CriterionResult]:
    return [run_criterion(i, threads) for i in (numbers or sorted(CRITERIA))]
