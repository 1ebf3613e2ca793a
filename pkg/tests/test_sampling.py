from __future__ import annotations

import math

import numpy as np
import pytest

from frlab import model as md
from frlab import sampling as sp
from frlab.errors import ContractViolation
from frlab.model import FactorModel, IsotropicNoise, ZeroNoise
from frlab.sampling import NoiseLaw, SeedSpec

from conftest import dense_sigma_x, random_model

# lambda_K(A'A) >= GAUSSIAN_LOADING_C * p / sqrt(K) once p >= 50 K; frozen after
# observing a worst ratio of about 0.7 over the seeds below
GAUSSIAN_LOADING_C = 0.5


class TestNoiseLaw:
    @pytest.mark.parametrize("law", list(NoiseLaw))
    def test_moments(self, law):
        x = law.draw(np.random.default_rng(0), 200_000)
        se_mean = x.std() / math.sqrt(x.size)
        se_var = np.sqrt(np.var((x - x.mean()) ** 2) / x.size)
        assert abs(x.mean()) <= 5 * se_mean
        assert abs(x.var() - 1.0) <= 5 * se_var


class TestSeedSpec:
    def test_streams_differ_by_role_and_index(self):
        s = SeedSpec(7, 1, 2)
        a = s.rng("factors").standard_normal(4)
        np.testing.assert_array_equal(a, SeedSpec(7, 1, 2).rng("factors").standard_normal(4))
        assert not np.array_equal(a, s.rng("noise").standard_normal(4))
        assert not np.array_equal(a, s.child(replicate_index=3).rng("factors").standard_normal(4))

    def test_range(self):
        with pytest.raises(ContractViolation):
            SeedSpec(-1)
        SeedSpec(2**64 - 1)


class TestSampleDataset:
    def test_zero_response(self, rng):
        m = random_model(rng).with_(beta=np.zeros(3), sigma_eps=0.0)
        np.testing.assert_array_equal(sp.sample_dataset(m, 10, seed=1).y, np.zeros(10))

    def test_noiseless_rank(self, rng):
        m = random_model(rng, p=20, k=3, noise="zero")
        assert np.linalg.matrix_rank(sp.sample_dataset(m, 15, seed=2).X) <= 3

    def test_algebraic_identities(self, rng):
        m = random_model(rng)
        d = sp.sample_dataset(m, 9, seed=3, keep_E=True)
        np.testing.assert_array_equal(d.y, d.Z @ m.beta + d.eps)
        np.testing.assert_array_equal(d.X, d.Z @ m.loading.T + d.E)

    def test_deterministic(self, rng):
        m = random_model(rng)
        a = sp.sample_dataset(m, 5, NoiseLaw.RADEMACHER, SeedSpec(4, 2, 1))
        b = sp.sample_dataset(m, 5, NoiseLaw.RADEMACHER, SeedSpec(4, 2, 1))
        for x, y in zip(a, b):
            if x is not None:
                np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("law", list(NoiseLaw))
    def test_sample_covariance(self, rng, law):
        m = random_model(rng, p=4, k=2, noise="diagonal")
        n = 100_000
        x = sp.sample_dataset(m, n, law, seed=5).X
        s = dense_sigma_x(m)
        emp = x.T @ x / n
        # entrywise SE of the mean of x_i x_j, estimated from the sample
        se = np.sqrt(np.var(x[:, :, None] * x[:, None, :], axis=0) / n)
        assert np.all(np.abs(emp - s) <= 5 * se)

    def test_replicate_streams_uncorrelated(self, rng):
        m = random_model(rng, p=50, k=2)
        a = sp.sample_dataset(m, 400, seed=SeedSpec(0, 0, 0)).X.ravel()
        b = sp.sample_dataset(m, 400, seed=SeedSpec(0, 0, 1)).X.ravel()
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) <= 5 / math.sqrt(a.size)

    def test_holdout_stream_independent(self, rng):
        m = random_model(rng)
        a = sp.sample_dataset(m, 5, seed=1).X
        b = sp.sample_dataset(m, 5, seed=1, stream="holdout/").X
        assert not np.array_equal(a, b)

    def test_n_positive(self, rng):
        with pytest.raises(ContractViolation):
            sp.sample_dataset(random_model(rng), 0)


class TestLoadings:
    def test_scaled_orthogonal(self):
        a = sp.loading_scaled_orthogonal(50, 6, SeedSpec(1))
        np.testing.assert_allclose(a.T @ a, 50 * np.eye(6), atol=1e-8)
        np.testing.assert_array_equal(a, sp.loading_scaled_orthogonal(50, 6, SeedSpec(1)))

    def test_scaled_orthogonal_square(self):
        a = sp.loading_scaled_orthogonal(5, 5, 3)
        np.testing.assert_allclose(a @ a.T, 5 * np.eye(5), atol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(a, 2) ** 2, 5)

    def test_gaussian_variance(self):
        k = 16
        a = sp.loading_gaussian(10_000, k, 2)
        assert abs(a.var() / k**-0.5 - 1) <= 0.05
        np.testing.assert_array_equal(a, sp.loading_gaussian(10_000, k, 2))
        assert abs(sp.loading_gaussian(10_000, k, 2, convention="std").var() * k - 1) <= 0.05

    @pytest.mark.parametrize("k", [2, 5, 10])
    def test_gaussian_lambda_k(self, k):
        p = 50 * k
        for seed in range(20):
            a = sp.loading_gaussian(p, k, seed)
            lam = np.linalg.eigvalsh(a.T @ a)[0]
            assert lam >= GAUSSIAN_LOADING_C * p / math.sqrt(k)

    def test_canonical_sparse(self):
        a = sp.loading_canonical_sparse(4, 2)
        np.testing.assert_array_equal(a, [[2, 0], [0, 2], [0, 0], [0, 0]])
        np.testing.assert_array_equal(a.T @ a, 4 * np.eye(2))

    def test_canonical_sparse_alpha_star(self):
        p, k = 30, 3
        m = FactorModel(sp.loading_canonical_sparse(p, k), np.eye(k), IsotropicNoise(1.0), np.ones(k))
        alpha = md.best_linear_predictor(m)
        np.testing.assert_allclose(alpha[:k], math.sqrt(p) / (p + 1), rtol=1e-14)
        np.testing.assert_array_equal(alpha[k:], 0.0)

    def test_cluster(self):
        a = sp.loading_cluster_assignment(10, 2, [3, 5])
        assert np.linalg.eigvalsh(a.T @ a)[0] == 3
        np.testing.assert_array_equal(a[8:], 0)
        np.testing.assert_array_equal(sp.loading_cluster_assignment(4, 1, [4]).T @ np.ones(4), [4])
        with pytest.raises(ContractViolation):
            sp.loading_cluster_assignment(5, 2, [3, 3])

    def test_k_above_p(self):
        with pytest.raises(ContractViolation):
            sp.loading_scaled_orthogonal(2, 3)


class TestConcentrationProbe:
    def test_band_holds(self):
        n = 50
        for seed in range(20):
            res = sp.concentration_probe(n, np.eye(100 * n), seed=seed)
            assert res.within_band
            assert res.lambda_min >= 100 * n / 2 - sp.CONCENTRATION_C * n

    def test_zero_sigma(self):
        res = sp.concentration_probe(5, np.zeros((8, 8)))
        assert res.lambda_min == 0 and res.lambda_max == 0

    def test_single_row_expectation(self, rng):
        g = rng.standard_normal((6, 6))
        s = g @ g.T
        vals = [sp.concentration_probe(1, s, seed=i).lambda_min for i in range(4000)]
        se = np.std(vals) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - np.trace(s)) <= 5 * se
