from __future__ import annotations

import numpy as np
import pytest

from frlab.model import DenseNoise, DiagonalNoise, FactorModel, IsotropicNoise, ZeroNoise


def two_feature_model(sigma_eps: float = 1.0) -> FactorModel:
    """p = 2, K = 1, A = (1, 1)', Sigma_Z = 1, Sigma_E = I, beta = 1."""
    return FactorModel(np.array([[1.0], [1.0]]), np.eye(1), IsotropicNoise(1.0), np.ones(1), sigma_eps)


def random_model(rng: np.random.Generator, p: int = 7, k: int = 3, noise: str = "dense") -> FactorModel:
    a = rng.standard_normal((p, k))
    g = rng.standard_normal((k, k))
    sz = g @ g.T + 0.5 * np.eye(k)
    if noise == "dense":
        h = rng.standard_normal((p, p))
        se = DenseNoise(h @ h.T / p + 0.3 * np.eye(p))
    elif noise == "diagonal":
        se = DiagonalNoise(rng.uniform(0.3, 2.0, p))
    elif noise == "isotropic":
        se = IsotropicNoise(float(rng.uniform(0.5, 2.0)))
    else:
        se = ZeroNoise()
    return FactorModel(a, sz, se, rng.standard_normal(k), float(rng.uniform(0.5, 1.5)))


def dense_sigma_x(model: FactorModel) -> np.ndarray:
    a, sz = model.loading, model.factor_cov
    return a @ sz @ a.T + model.noise_cov.dense(model.p)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for r in sorted(RESULTS, key=lambda r: r.number):
            terminalreporter.write_line(r.line())
