from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frlab import estimators as es
from frlab.errors import ContractViolation
from frlab.model import FactorModel, IsotropicNoise, ZeroNoise, sigma_x_dense
from frlab.sampling import SeedSpec, loading_gaussian, sample_dataset

from conftest import random_model


def _gaussian_xy(rng, n, p, noise=1.0):
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = [2.0, -1.5, 1.0]
    return X, X @ beta + noise * rng.standard_normal(n)


class TestMinNorm:
    def test_single_row(self):
        fit = es.fit_min_norm(np.array([[2.0, 0.0]]), np.array([4.0]))
        np.testing.assert_allclose(fit.coefficients, [2.0, 0.0])
        assert fit.method is es.Method.MIN_NORM

    def test_square(self, rng):
        X = rng.standard_normal((5, 5))
        y = rng.standard_normal(5)
        np.testing.assert_allclose(es.fit_min_norm(X, y).coefficients, np.linalg.solve(X, y), rtol=1e-10)

    def test_interpolates(self, rng):
        X = rng.standard_normal((20, 60))
        y = rng.standard_normal(20)
        fit = es.fit_min_norm(X, y)
        assert fit.metadata["training_residual"] <= 1e-8 * np.linalg.norm(y)
        np.testing.assert_allclose(fit.metadata["coef_norm_sq"], fit.coefficients @ fit.coefficients)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 15), p=st.integers(1, 15), seed=st.integers(0, 2**32 - 1))
    def test_matches_pinv(self, n, p, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        np.testing.assert_allclose(es.fit_min_norm(X, y).coefficients, np.linalg.pinv(X) @ y, rtol=1e-8, atol=1e-10)

    def test_bad_y(self):
        with pytest.raises(ContractViolation):
            es.fit_min_norm(np.eye(2), np.ones(3))


class TestPcr:
    def test_noiseless_equals_min_norm(self):
        m = FactorModel(loading_gaussian(40, 4, 1), np.eye(4), ZeroNoise(), np.ones(4))
        d = sample_dataset(m, 25, seed=2)
        a = es.fit_pcr_empirical(d.X, d.y, 4).coefficients
        np.testing.assert_allclose(a, es.fit_min_norm(d.X, d.y).coefficients, rtol=1e-8, atol=1e-10)
        b = es.fit_pcr_stylized(m, d.X, d.y, 4).coefficients
        np.testing.assert_allclose(d.X @ b, d.Z @ es.fit_oracle_z(d.Z, d.y), rtol=1e-8, atol=1e-10)

    def test_k_bounds(self, rng):
        X = rng.standard_normal((5, 3))
        with pytest.raises(ContractViolation):
            es.fit_pcr_empirical(X, np.ones(5), 0)
        with pytest.raises(ContractViolation):
            es.fit_pcr_empirical(X, np.ones(5), 4)

    def test_full_k_interpolates(self, rng):
        X = rng.standard_normal((6, 9))
        y = rng.standard_normal(6)
        assert es.fit_pcr_empirical(X, y, 6).metadata["training_residual"] <= 1e-10

    def test_orthogonal_hand_case(self):
        X = np.array([[3.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        y = np.array([1.0, 2.0, 3.0])
        # top direction of X'X = diag(9, 1) is e1; coefficient (X e1)^+ y = 3/9
        np.testing.assert_allclose(es.fit_pcr_empirical(X, y, 1).coefficients, [1 / 3, 0.0], atol=1e-15)

    def test_gram_trick_matches_direct(self, rng):
        X = rng.standard_normal((8, 20))
        basis = es.empirical_principal_directions(X, 3)
        vecs = np.linalg.eigh(X.T @ X)[1][:, ::-1][:, :3]
        np.testing.assert_allclose(np.abs(basis.T @ vecs), np.eye(3), atol=1e-10)

    def test_stylized_isotropic_directions(self, rng):
        m = random_model(rng, p=25, k=3, noise="isotropic")
        u = es.population_principal_directions(m, 3)
        vecs = np.linalg.eigh(sigma_x_dense(m))[1][:, ::-1][:, :3]
        np.testing.assert_allclose(np.abs(u.T @ vecs), np.eye(3), atol=1e-8)

    def test_stylized_full_k_is_ols(self, rng):
        m = random_model(rng, p=5, k=2)
        d = sample_dataset(m, 30, seed=1)
        ols = np.linalg.lstsq(d.X, d.y, rcond=None)[0]
        np.testing.assert_allclose(es.fit_pcr_stylized(m, d.X, d.y, 5).coefficients, ols, rtol=1e-8)


class TestRidge:
    def test_heavy_shrinkage(self, rng):
        X, y = _gaussian_xy(rng, 20, 10)
        assert np.linalg.norm(es.fit_ridge(X / 5, y / 5, 1e12).coefficients) <= 1e-6

    def test_small_penalty_is_min_norm(self, rng):
        X, y = _gaussian_xy(rng, 15, 40)
        a = es.fit_ridge(X, y, 1e-10).coefficients
        b = es.fit_min_norm(X, y).coefficients
        assert np.linalg.norm(a - b) <= 1e-4 * np.linalg.norm(b)

    def test_hand_instance(self):
        X = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        # X'(XX' + I)^{-1} y with XX' + I = [[3,1],[1,3]]
        np.testing.assert_allclose(es.fit_ridge(X, np.array([1.0, 2.0]), 1.0).coefficients, [1 / 8, 6 / 8, 5 / 8], atol=1e-10)

    @pytest.mark.parametrize("shape", [(10, 30), (30, 10)])
    def test_primal_dual_and_path(self, rng, shape):
        X, y = _gaussian_xy(rng, *shape)
        lam = 0.7
        direct = np.linalg.solve(X.T @ X + lam * np.eye(shape[1]), X.T @ y)
        np.testing.assert_allclose(es.fit_ridge(X, y, lam).coefficients, direct, rtol=1e-9)
        np.testing.assert_allclose(es.ridge_path(X, y, [lam, 2.0])[:, 0], direct, rtol=1e-9)

    def test_penalty_positive(self):
        with pytest.raises(ContractViolation):
            es.fit_ridge(np.eye(2), np.ones(2), 0.0)


class TestLasso:
    def test_zero_above_lambda_max(self, rng):
        X, y = _gaussian_xy(rng, 30, 50)
        lmax = es.lasso_lambda_max(X, y)
        np.testing.assert_array_equal(es.fit_lasso(X, y, lmax).coefficients, 0.0)
        np.testing.assert_array_equal(es.fit_lasso(X, y, 2 * lmax).coefficients, 0.0)
        assert np.any(es.fit_lasso(X, y, 0.9 * lmax).coefficients != 0)

    def test_orthonormal_soft_threshold(self, rng):
        n, p = 40, 6
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        X = np.sqrt(n) * q
        y = rng.standard_normal(n) + X[:, 0]
        lam = 0.3
        z = X.T @ y / n
        expected = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
        np.testing.assert_allclose(es.fit_lasso(X, y, lam).coefficients, expected, atol=1e-7)

    def test_zero_penalty_is_ols(self, rng):
        X, y = _gaussian_xy(rng, 50, 5)
        fit = es.fit_lasso(X, y, 0.0)
        np.testing.assert_allclose(fit.coefficients, np.linalg.lstsq(X, y, rcond=None)[0], rtol=1e-6)
        assert fit.metadata["converged"]

    @pytest.mark.parametrize("frac", [0.5, 0.05, 1e-3])
    def test_kkt_at_convergence(self, rng, frac):
        X, y = _gaussian_xy(rng, 40, 120)
        lam = frac * es.lasso_lambda_max(X, y)
        fit = es.fit_lasso(X, y, lam)
        assert fit.metadata["converged"]
        assert fit.metadata["kkt_residual"] <= 1e-6
        assert fit.metadata["duality_gap"] >= -1e-12

    def test_cold_descent_matches_homotopy(self, rng):
        X, y = _gaussian_xy(rng, 40, 80)
        lam = 0.05 * es.lasso_lambda_max(X, y)
        cold = es.fit_lasso(X, y, lam, warm_start=np.zeros(80), tol=1e-12)
        warm = es.fit_lasso(X, y, lam)
        np.testing.assert_allclose(cold.coefficients, warm.coefficients, atol=1e-6)

    def test_path_matches_single_fits(self, rng):
        X, y = _gaussian_xy(rng, 30, 60)
        lams = es.default_lasso_grid(X, y, 8, 1e-3, 2.0)
        path = es.lasso_path(X, y, lams)
        for j, lam in enumerate(lams):
            assert es.lasso_kkt_residual(X, y, path[:, j], lam) <= 1e-8
            np.testing.assert_allclose(path[:, j], es.fit_lasso(X, y, lam).coefficients, atol=1e-6)

    def test_degenerate_columns(self):
        X = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
        y = np.array([1.0, 2.0, 0.5, 1.0])
        lam = 0.1 * es.lasso_lambda_max(X, y)
        fit = es.fit_lasso(X, y, lam)
        assert fit.metadata["kkt_residual"] <= 1e-6
        path = es.lasso_path(X, y, [lam])
        assert es.lasso_kkt_residual(X, y, path[:, 0], lam) <= 1e-6

    def test_iteration_budget(self, rng):
        X, y = _gaussian_xy(rng, 30, 90)
        fit = es.fit_lasso(X, y, 1e-4 * es.lasso_lambda_max(X, y), warm_start=np.zeros(90), max_iter=2)
        assert not fit.metadata["converged"]


class TestCrossValidation:
    def test_single_point_grid(self, rng):
        X, y = _gaussian_xy(rng, 20, 10)
        assert es.cross_validate("ridge", X, y, es.CvPlan(4, (0.3,), 1)).best_lambda == 0.3

    def test_duplicate_grid_entries(self, rng):
        X, y = _gaussian_xy(rng, 20, 10)
        res = es.cross_validate("ridge", X, y, es.CvPlan(4, (0.5, 0.5), 1))
        assert res.best_lambda == 0.5

    def test_ties_go_to_larger_penalty(self, rng):
        X, y = _gaussian_xy(rng, 20, 10)
        lmax = es.lasso_lambda_max(X, y)
        # every penalty at or above lambda_max gives the zero fit, so all tie
        res = es.cross_validate("lasso", X, y, es.CvPlan(4, (2 * lmax, 3 * lmax, 4 * lmax), 1))
        assert res.best_lambda == 4 * lmax

    def test_deterministic_and_fitter_forms(self, rng):
        X, y = _gaussian_xy(rng, 30, 15)
        plan = es.CvPlan(5, es.log_grid(1.0, 6), 9)
        a = es.cross_validate("ridge", X, y, plan)
        b = es.cross_validate(es.ridge_path, X, y, plan)
        c = es.cross_validate(es.fit_ridge, X, y, plan)
        np.testing.assert_array_equal(a.cv_curve, b.cv_curve)
        np.testing.assert_allclose(a.cv_curve, c.cv_curve, rtol=1e-9)
        assert a.best_lambda == c.best_lambda

    def test_planted_interior_optimum(self):
        interior = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X, y = _gaussian_xy(rng, 60, 100)
            grid = es.default_lasso_grid(X, y, 10, 1e-3, 1.0)
            best = es.cross_validate("lasso", X, y, es.CvPlan(5, grid, seed)).best_lambda
            interior += grid[0] < best < grid[-1]
        assert interior == 20

    def test_plan_validation(self):
        with pytest.raises(ContractViolation):
            es.CvPlan(1, (1.0,))
        with pytest.raises(ContractViolation):
            es.CvPlan(3, (2.0, 1.0))
        with pytest.raises(ContractViolation):
            es.CvPlan(3, (-1.0,))
        with pytest.raises(ContractViolation):
            es.fold_indices(3, 5, 0)

    def test_folds_partition(self):
        folds = es.fold_indices(23, 5, 4)
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))
        assert {len(f) for f in folds} <= {4, 5}


class TestOracleZ:
    def test_identity_design(self, rng):
        y = rng.standard_normal(4)
        np.testing.assert_allclose(es.fit_oracle_z(np.eye(4), y), y)

    def test_noiseless_recovery(self, rng):
        Z = rng.standard_normal((20, 4))
        beta = rng.standard_normal(4)
        np.testing.assert_allclose(es.fit_oracle_z(Z, Z @ beta), beta, rtol=1e-10)

    def test_noiseless_min_norm_predicts_like_oracle(self):
        m = FactorModel(loading_gaussian(30, 3, 5), np.eye(3), ZeroNoise(), np.ones(3))
        d = sample_dataset(m, 12, seed=SeedSpec(1))
        a_hat = es.fit_min_norm(d.X, d.y).coefficients
        b_hat = es.fit_oracle_z(d.Z, d.y)
        np.testing.assert_allclose(d.X @ a_hat, d.Z @ b_hat, rtol=1e-8, atol=1e-10)
        fresh = sample_dataset(m, 50, seed=SeedSpec(2))
        np.testing.assert_allclose(fresh.X @ a_hat, fresh.Z @ b_hat, rtol=1e-8, atol=1e-10)


def test_null_predictor():
    fit = es.fit_null(4, np.ones((2, 4)), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(fit.coefficients, np.zeros(4))
    np.testing.assert_allclose(fit.metadata["training_residual"], np.sqrt(5))
