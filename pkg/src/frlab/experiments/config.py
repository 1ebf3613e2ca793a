"""JSON experiment configuration, validated with pydantic (unknown fields rejected)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridPoint(_Strict):
    K: int = Field(ge=1)
    n: int = Field(ge=1)
    p: int = Field(ge=1)


class GridRule(_Strict):
    """K linear in ``[k_start, k_stop]``, ``n = floor(K^n_exponent)``, p log-spaced.

    ``p_scale`` multiplies every p before rounding (the CLI ``--scale``).
    """

    k_start: int = Field(ge=1)
    k_stop: int = Field(ge=1)
    points: int = Field(ge=1)
    p_start: int = Field(ge=1)
    p_stop: int = Field(ge=1)
    n_exponent: float = 1.5
    p_scale: float = Field(default=1.0, gt=0)

    def materialize(self) -> list[GridPoint]:
        steps = np.linspace(0.0, 1.0, self.points) if self.points > 1 else np.zeros(1)
        ks = np.rint(self.k_start + steps * (self.k_stop - self.k_start)).astype(int)
        ps = self.p_start * (self.p_stop / self.p_start) ** steps
        out = []
        for k, p in zip(ks, ps):
            # tiny offset keeps floor() exact for perfect powers such as 16^1.5
            n = int(math.floor(float(k) ** self.n_exponent + 1e-9))
            out.append(GridPoint(K=int(k), n=max(n, 1), p=max(int(np.rint(self.p_scale * p)), 1)))
        return out


class LoadingSpec(_Strict):
    kind: Literal["scaled_orthogonal", "gaussian", "canonical_sparse", "cluster", "custom"]
    convention: Literal["variance", "std"] = "variance"
    scale: float | None = None
    sizes: list[int] | None = None
    matrix: list[list[float]] | None = None


class CovSpec(_Strict):
    """``identity_complement`` builds ``Sigma_E = I - A Sigma_Z A'`` so that ``Sigma_X = I``."""

    kind: Literal["identity", "isotropic", "zero", "diagonal", "dense", "identity_complement"]
    variance: float = Field(default=1.0, gt=0)
    values: list[float] | None = None
    matrix: list[list[float]] | None = None


class BetaSpec(_Strict):
    kind: Literal["all_ones", "custom"]
    values: list[float] | None = None


class CvSpec(_Strict):
    folds: int = Field(default=5, ge=2)
    points: int = Field(default=30, ge=1)
    lo: float = Field(default=1e-4, gt=0)
    hi: float = Field(default=1e2, gt=0)
    penalty_grid: list[float] | None = None


ESTIMATOR_NAMES = (
    "gls",
    "pcr_empirical",
    "pcr_stylized",
    "ridge",
    "ridge_cv",
    "lasso",
    "lasso_cv",
    "null",
    "oracle_z",
)


class EstimatorSpec(_Strict):
    name: Literal[ESTIMATOR_NAMES]
    k: int | None = Field(default=None, ge=1)
    penalty: float | None = Field(default=None, ge=0)
    cv: CvSpec = CvSpec()

    @model_validator(mode="after")
    def _penalty_needed(self):
        if self.name in ("ridge", "lasso") and self.penalty is None:
            raise ValueError(f"estimator {self.name!r} needs a fixed 'penalty'")
        return self


class ExactRisk(_Strict):
    kind: Literal["exact"] = "exact"


class HoldoutRisk(_Strict):
    kind: Literal["holdout"] = "holdout"
    m: int = Field(ge=1)


class ExperimentConfig(_Strict):
    design: Literal["Figure1", "Figure2", "Figure4", "NullRisk", "Custom"]
    grid: Union[GridRule, list[GridPoint]]
    loading_kind: LoadingSpec
    noise_law: Literal["gaussian", "rademacher", "uniform"] = "gaussian"
    sigma_z_kind: CovSpec = CovSpec(kind="identity")
    sigma_e_kind: CovSpec = CovSpec(kind="identity")
    beta_kind: BetaSpec = BetaSpec(kind="all_ones")
    sigma_eps: float = Field(default=1.0, ge=0)
    estimators: list[EstimatorSpec]
    replicates: int = Field(default=20, ge=0)
    redraw_loading_per_replicate: bool = True
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    eval_mode: Union[ExactRisk, HoldoutRisk] = ExactRisk()
    output_dir: str | None = None

    @field_validator("grid")
    @classmethod
    def _grid_nonempty(cls, g):
        if isinstance(g, list) and not g:
            raise ValueError("grid must be nonempty")
        return g

    @field_validator("estimators")
    @classmethod
    def _estimators_nonempty(cls, e):
        if not e:
            raise ValueError("estimators must be nonempty")
        return e

    def grid_points(self) -> list[GridPoint]:
        return self.grid.materialize() if isinstance(self.grid, GridRule) else list(self.grid)

    def warnings(self) -> list[str]:
        """Grid points violating ``K <= min(n, p)`` (allowed, but flagged)."""
        return [
            f"grid point {i}: K={g.K} exceeds min(n, p)={min(g.n, g.p)}"
            for i, g in enumerate(self.grid_points())
            if g.K > min(g.n, g.p)
        ]

    def with_(self, **changes) -> "ExperimentConfig":
        return self.model_copy(update=changes)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"field '{loc}': {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a JSON document; errors carry the line/column or offending field."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
