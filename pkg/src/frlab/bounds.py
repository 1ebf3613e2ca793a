"""Finite-sample risk bounds and regime checks for min-norm factor regression.

Absolute constants in the ``<~`` bounds are set to 1 and logarithms are
natural. A :class:`BoundReport` records every input its formula reads, so
``recompute(report) == report.value`` holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractViolation
from .model import (
    DENSE_CAP,
    FactorModel,
    PopulationSummary,
    SpectrumSummary,
    inv_or_zero,
    population_summary,
    sigma_x_spectrum,
)

__all__ = [
    "BoundReport",
    "SpectrumSummary",
    "BartlettRanks",
    "SandwichCheck",
    "model_inputs",
    "null_ratio_bound",
    "effective_rank_condition",
    "main_excess_bound",
    "purevar_bound",
    "lowdim_bound",
    "pcr_bound",
    "bartlett_effective_ranks",
    "bartlett_kstar",
    "bartlett_bias_variance",
    "kstar_sandwich_check",
    "recompute",
    "DEFAULT_B",
]

DEFAULT_B = 2.0


@dataclass
class BoundReport:
    name: str
    value: float
    inputs: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)
    notes: str = ""
    terms: dict = field(default_factory=dict)


def _mul(*factors: float) -> float:
    # product in which an exact zero wins over an infinity (1/inf = 0 convention)
    if any(f == 0.0 for f in factors):
        return 0.0
    return math.prod(factors)


def model_inputs(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> dict:
    """The named scalars every bound draws on."""
    if n < 1:
        raise ContractViolation("n must be positive")
    s = summary if summary is not None else population_summary(model, assert_full_rank=False)
    return {
        "n": float(n),
        "p": float(s.p),
        "K": float(s.K),
        "xi": s.xi,
        "inv_xi": s.inv_xi,
        "re_sigma_e": s.re_sigma_e,
        "re_sigma_x": s.re_sigma_x,
        "beta_sz_norm_sq": s.beta_sz_norm_sq,
        "sigma_eps_sq": model.sigma_eps**2,
        "kappa_sigma_e": s.kappa_sigma_e,
        "lambda_k_ata": s.lambda_k_ata,
        "sigma_e_opnorm": s.sigma_e_opnorm,
        "sigma_x_opnorm": s.sigma_x_opnorm,
        "alpha_star_norm_sq": s.alpha_star_norm_sq,
        "risk_star": s.risk_star,
        "sigma_e_zero": float(s.sigma_e_zero),
    }


# --------------------------------------------------------------------------
# Formulas: inputs -> (value, terms)
# --------------------------------------------------------------------------


def _f_null_ratio(v):
    return math.sqrt(v["n"] / v["re_sigma_x"]), {}


def _f_effective_rank(v):
    signal = v["K"] / v["n"]
    noise = _mul(v["re_sigma_e"], v["inv_xi"]) / v["n"]
    return signal + noise, {"signal": signal, "noise": noise}


def _f_main(v):
    n, log_n, s2 = v["n"], math.log(v["n"]), v["sigma_eps_sq"]
    bias = _mul(v["beta_sz_norm_sq"], v["inv_xi"], v["re_sigma_e"]) / n
    var_tail = _mul(s2, n, log_n) / v["re_sigma_e"]
    var_factor = _mul(s2, v["K"], log_n) / n
    terms = {"bias": bias, "variance_tail": var_tail, "variance_factor": var_factor}
    return bias + var_tail + var_factor, terms


def _f_purevar(v):
    n, p, k, log_n = v["n"], v["p"], v["K"], math.log(v["n"])
    bias = math.inf if v["lambda_k_ata"] == 0 else k / v["lambda_k_ata"] * p / n
    var = _mul(v["sigma_eps_sq"], n / p + k / n, log_n)
    terms = {"bias": bias, "variance": var}
    if v["lambda_k_ata"] >= p / k:
        terms["bias_balanced"] = k * k / n
        terms["value_balanced"] = k * k / n + var
    return bias + var, terms


def _f_lowdim(v):
    bias = _mul(v["kappa_sigma_e"], v["beta_sz_norm_sq"], v["inv_xi"])
    var = _mul(v["p"] / v["n"], v["sigma_eps_sq"], math.log(v["n"]))
    return bias + var, {"bias": bias, "variance": var}


def _f_pcr(v):
    n, p, k, log_n = v["n"], v["p"], v["K"], math.log(v["n"])
    noiseless = _mul(v["sigma_eps_sq"], k, log_n) / n
    if v["sigma_e_zero"]:
        return noiseless, {"pcr_noiseless": noiseless}
    general = _mul(v["sigma_e_opnorm"], v["alpha_star_norm_sq"], p / n) + _mul(v["risk_star"], k, log_n) / n
    terms = {"pcr_general": general}
    if math.isfinite(v["kappa_sigma_e"]):
        terms["pcr_invertible"] = _mul(v["kappa_sigma_e"], v["beta_sz_norm_sq"], v["inv_xi"], p / n) + noiseless
    return general, terms


def _f_bartlett(v):
    n, log_n = v["n"], math.log(v["n"])
    ratio = v["r0"] / n
    growth = max(math.sqrt(ratio), ratio)
    bias = _mul(v["alpha_star_norm_sq"], v["sigma_x_opnorm"], max(growth, 1.0))
    if v["kstar"] < 0:
        var = math.inf
    else:
        var = _mul(v["sigma_eps_sq"], log_n, n / v["R_kstar"] + v["kstar"] / n)
    terms = {"bias": bias, "variance": var}
    if math.isfinite(v["kappa_sigma_e"]) and v["xi"] > 1:
        xi_factor = 1.0 if math.isinf(v["xi"]) else (v["xi"] - 1) / (v["xi"] + 1)
        terms["bias_lower"] = _mul(xi_factor / v["kappa_sigma_e"], v["beta_sz_norm_sq"], growth)
    return bias + var, terms


FORMULAS: dict[str, Callable[[dict], tuple]] = {
    "null_ratio": _f_null_ratio,
    "effective_rank_condition": _f_effective_rank,
    "main_excess": _f_main,
    "purevar": _f_purevar,
    "lowdim": _f_lowdim,
    "pcr": _f_pcr,
    "bartlett": _f_bartlett,
}


def recompute(report: BoundReport) -> float:
    """Re-evaluate a report's formula from its stored inputs."""
    return FORMULAS[report.name](report.inputs)[0]


def _report(name: str, inputs: dict, conditions: dict, notes: str = "") -> BoundReport:
    value, terms = FORMULAS[name](inputs)
    return BoundReport(name, float(value), inputs, conditions, notes, terms)


def _pick(inputs: dict, keys) -> dict:
    return {k: inputs[k] for k in keys}


# --------------------------------------------------------------------------
# Bound calculators
# --------------------------------------------------------------------------


def null_ratio_bound(n: int, summary: PopulationSummary) -> BoundReport:
    """``sqrt(n / r_e(Sigma_X))``: how close the min-norm risk is to the null risk."""
    if n < 1:
        raise ContractViolation("n must be positive")
    inputs = {"n": float(n), "re_sigma_x": summary.re_sigma_x}
    return _report("null_ratio", inputs, {"re_sigma_x > n": summary.re_sigma_x > n})


def effective_rank_condition(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> BoundReport:
    """Upper bound ``K/n + r_e(Sigma_E)/(n xi)`` on ``r_e(Sigma_X)/n``."""
    v = model_inputs(model, n, summary)
    inputs = _pick(v, ("n", "K", "xi", "inv_xi", "re_sigma_e"))
    conditions = {"K/n <= 1": v["K"] <= v["n"], "xi >= re_sigma_e/n": v["xi"] >= v["re_sigma_e"] / v["n"]}
    return _report("effective_rank_condition", inputs, conditions)


def main_excess_bound(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> BoundReport:
    """Bias ``||beta||^2_{Sigma_Z} r_e(Sigma_E)/(n xi)`` plus two variance terms."""
    v = model_inputs(model, n, summary)
    inputs = _pick(v, ("n", "K", "xi", "inv_xi", "re_sigma_e", "beta_sz_norm_sq", "sigma_eps_sq"))
    conditions = {"n > K": v["n"] > v["K"], "re_sigma_e > n": v["re_sigma_e"] > v["n"]}
    notes = "Sigma_E = 0: r_e taken as 1 by convention" if v["sigma_e_zero"] else ""
    return _report("main_excess", inputs, conditions, notes)


def purevar_bound(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> BoundReport:
    """``K p/(n lambda_K(A'A)) + sigma^2 (n/p + K/n) ln n``, and the ``K^2/n`` form."""
    v = model_inputs(model, n, summary)
    inputs = _pick(v, ("n", "p", "K", "lambda_k_ata", "sigma_eps_sq"))
    conditions = {
        "lambda_k_ata >= p/K": v["lambda_k_ata"] >= v["p"] / v["K"],
        "re_sigma_e >= p/2": v["re_sigma_e"] >= v["p"] / 2,
        "sigma_e_nonzero": not v["sigma_e_zero"],
    }
    return _report("purevar", inputs, conditions)


def lowdim_bound(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> BoundReport:
    """``kappa(Sigma_E) ||beta||^2_{Sigma_Z}/xi + (p/n) sigma^2 ln n`` for ``n > p``."""
    v = model_inputs(model, n, summary)
    inputs = _pick(v, ("n", "p", "kappa_sigma_e", "beta_sz_norm_sq", "xi", "inv_xi", "sigma_eps_sq"))
    kappa_ok = math.isfinite(v["kappa_sigma_e"])
    conditions = {"n > p": v["n"] > v["p"], "kappa_finite": kappa_ok}
    notes = "" if kappa_ok else "kappa(Sigma_E) undefined; bias term dropped"
    return _report("lowdim", inputs, conditions, notes)


def pcr_bound(model: FactorModel, n: int, summary: PopulationSummary | None = None) -> BoundReport:
    """Stylized PCR risk bound in its general, noiseless and invertible-noise forms.

    ``value`` is the general form, or the noiseless form when ``Sigma_E = 0``.
    """
    v = model_inputs(model, n, summary)
    keys = ("n", "p", "K", "sigma_eps_sq", "sigma_e_zero", "sigma_e_opnorm", "alpha_star_norm_sq",
            "risk_star", "kappa_sigma_e", "beta_sz_norm_sq", "xi", "inv_xi")
    inputs = _pick(v, keys)
    conditions = {"n > K": v["n"] > v["K"], "sigma_e_invertible": math.isfinite(v["kappa_sigma_e"])}
    return _report("pcr", inputs, conditions)


# --------------------------------------------------------------------------
# Comparison quantities on the Sigma_X spectrum
# --------------------------------------------------------------------------


class BartlettRanks(NamedTuple):
    r_k: float
    R_k: float
    degenerate: bool


def _eigs(spectrum) -> np.ndarray:
    w = spectrum.eigenvalues if isinstance(spectrum, SpectrumSummary) else spectrum
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ContractViolation("spectrum must be a nonempty vector")
    if np.any(np.diff(w) > 1e-12 * max(abs(w[0]), 1.0)):
        raise ContractViolation("spectrum must be sorted descending")
    return np.clip(w, 0.0, None)


def _tail_ranks(w: np.ndarray):
    # tails[k] = sum_{i>k} lambda_i  (0-based: sum of w[k:])
    tails = np.cumsum(w[::-1])[::-1]
    sq_tails = np.cumsum((w**2)[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(w > 0, tails / np.where(w > 0, w, 1.0), np.nan)
        big_r = np.where(sq_tails > 0, tails**2 / np.where(sq_tails > 0, sq_tails, 1.0), np.nan)
    return r, big_r


def bartlett_effective_ranks(spectrum, k: int) -> BartlettRanks:
    """``r_k = sum_{i>k} lambda_i / lambda_{k+1}`` and ``R_k = (sum lambda_i)^2 / sum lambda_i^2``."""
    w = _eigs(spectrum)
    if not 0 <= k < w.size:
        raise ContractViolation(f"k={k} must lie in [0, {w.size})")
    tail = w[k:]
    if tail[0] == 0.0:
        return BartlettRanks(math.nan, math.nan, True)
    return BartlettRanks(float(tail.sum() / tail[0]), float(tail.sum() ** 2 / np.sum(tail**2)), False)


def bartlett_kstar(spectrum, n: int, b: float = DEFAULT_B) -> int | None:
    """Smallest ``k`` with ``r_k / n >= b``; ``None`` if there is none."""
    if not b > 1:
        raise ContractViolation("b must exceed 1")
    r, _ = _tail_ranks(_eigs(spectrum))
    hits = np.flatnonzero(np.nan_to_num(r, nan=-np.inf) / n >= b)
    return int(hits[0]) if hits.size else None


def bartlett_bias_variance(
    model: FactorModel,
    n: int,
    b: float = DEFAULT_B,
    *,
    summary: PopulationSummary | None = None,
    cap: int = DENSE_CAP,
) -> BoundReport:
    """Bias ``||alpha*||^2 ||Sigma_X|| max(sqrt(r_0/n), r_0/n, 1)`` and variance
    ``sigma^2 ln n (n/R_{K*} + K*/n)``; ``terms['bias_lower']`` is the matching
    lower bound on the bias when ``xi > 1`` and ``Sigma_E`` is invertible.
    """
    v = model_inputs(model, n, summary)
    spectrum = sigma_x_spectrum(model, cap=cap)
    w = _eigs(spectrum)
    kstar = bartlett_kstar(w, n, b)
    r0 = bartlett_effective_ranks(w, 0)
    inputs = _pick(v, ("n", "K", "xi", "kappa_sigma_e", "beta_sz_norm_sq", "sigma_eps_sq",
                       "alpha_star_norm_sq", "sigma_x_opnorm"))
    inputs.update(
        b=float(b),
        r0=1.0 if r0.degenerate else r0.r_k,
        kstar=-1.0 if kstar is None else float(kstar),
        R_kstar=math.nan if kstar is None else bartlett_effective_ranks(w, kstar).R_k,
    )
    conditions = {
        "kstar_exists": kstar is not None,
        "kstar == K": kstar == model.K,
        "xi > 1": v["xi"] > 1,
        "sigma_e_invertible": math.isfinite(v["kappa_sigma_e"]),
    }
    notes = f"spectrum provenance: {spectrum.provenance}"
    return _report("bartlett", inputs, conditions, notes)


class SandwichCheck(NamedTuple):
    upper_ok: bool
    lower_ok: bool
    degenerate: bool


def kstar_sandwich_check(
    model: FactorModel,
    n: int,
    *,
    summary: PopulationSummary | None = None,
    cap: int = DENSE_CAP,
    slack: float = 1e-9,
) -> SandwichCheck:
    """Check ``r_l/n <= K/n (1 + 1/xi) + r_e(Sigma_E)/(n xi)`` for ``l < K`` and
    ``r_K/n >= r_e(Sigma_E)/n - K/n``."""
    v = model_inputs(model, n, summary)
    w = _eigs(sigma_x_spectrum(model, cap=cap))
    k = model.K
    r, _ = _tail_ranks(w)
    upper = k / n * (1 + v["inv_xi"]) + _mul(v["re_sigma_e"], v["inv_xi"]) / n
    head = r[: min(k, w.size)] / n
    degenerate = bool(np.any(np.isnan(head)))
    upper_ok = bool(np.all(np.nan_to_num(head, nan=0.0) <= upper + slack))
    if k >= w.size or w[k] == 0.0:
        # no tail spectrum: r_K = 1 by the zero-matrix convention
        degenerate = True
        r_k = 1.0
    else:
        r_k = float(r[k])
    lower_ok = bool(r_k / n >= v["re_sigma_e"] / n - k / n - slack)
    return SandwichCheck(upper_ok, lower_ok, degenerate)
