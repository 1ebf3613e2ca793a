from __future__ import annotations

import math

import numpy as np
import pytest

from frlab import model as md
from frlab.errors import ContractViolation, ModelDegenerateError, NotPSDError
from frlab.model import DenseNoise, DiagonalNoise, FactorModel, IsotropicNoise, ZeroNoise
from frlab.sampling import SeedSpec, loading_cluster_assignment, sample_dataset

from conftest import dense_sigma_x, random_model, two_feature_model


class TestConstruction:
    def test_shape_checks(self):
        with pytest.raises(ContractViolation):
            FactorModel(np.ones((3, 2)), np.eye(3), IsotropicNoise(1.0), np.ones(2))
        with pytest.raises(ContractViolation):
            FactorModel(np.ones((3, 2)), np.eye(2), IsotropicNoise(1.0), np.ones(3))
        with pytest.raises(ContractViolation):
            FactorModel(np.ones((3, 1)), np.eye(1), DiagonalNoise(np.ones(2)), np.ones(1))

    def test_indefinite_factor_cov(self):
        with pytest.raises(NotPSDError):
            FactorModel(np.ones((3, 2)), np.diag([1.0, -1.0]), IsotropicNoise(1.0), np.ones(2))

    def test_indefinite_noise(self):
        with pytest.raises(NotPSDError):
            DenseNoise(np.diag([1.0, -1.0]))

    def test_rank_deficient_loading_flagged(self):
        m = FactorModel(np.ones((4, 2)), np.eye(2), IsotropicNoise(1.0), np.ones(2))
        with pytest.raises(ModelDegenerateError):
            m.check_full_rank()


class TestSigmaX:
    def test_pure_noise(self, rng):
        m = FactorModel(np.zeros((4, 1)), np.eye(1), IsotropicNoise(1.0), np.ones(1))
        v = rng.standard_normal(4)
        np.testing.assert_allclose(md.sigma_x_apply(m, v), v)

    def test_two_feature_hand_case(self):
        np.testing.assert_allclose(md.sigma_x_apply(two_feature_model(), np.array([1.0, 0.0])), [2.0, 1.0])

    @pytest.mark.parametrize("noise", ["dense", "diagonal", "isotropic", "zero"])
    def test_matches_dense_assembly(self, rng, noise):
        m = random_model(rng, noise=noise)
        s = dense_sigma_x(m)
        v = rng.standard_normal(m.p)
        np.testing.assert_allclose(md.sigma_x_apply(m, v), s @ v, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(md.sigma_x_dense(m), s, atol=1e-12)
        np.testing.assert_allclose(md.sigma_x_trace(m), np.trace(s), rtol=1e-12)
        np.testing.assert_allclose(md.sigma_x_opnorm(m), np.linalg.eigvalsh(s)[-1], rtol=1e-10)
        np.testing.assert_allclose(md.sigma_x_spectrum(m).eigenvalues, np.linalg.eigvalsh(s)[::-1], atol=1e-10)

    def test_dense_cap(self, rng):
        m = random_model(rng)
        with pytest.raises(md.UnsupportedSizeError):
            md.sigma_x_dense(m, cap=3)


class TestBestLinearPredictor:
    def test_noiseless_hand_case(self):
        m = FactorModel(np.array([[1.0], [1.0]]), np.eye(1), ZeroNoise(), np.ones(1))
        np.testing.assert_allclose(md.best_linear_predictor(m), [0.5, 0.5])

    def test_two_feature_closed_form(self):
        m = two_feature_model()
        # sigma_Z^2 / (sigma_E^2 + a^2 sigma_Z^2) * A beta with a^2 = 2
        np.testing.assert_allclose(md.best_linear_predictor(m), [1 / 3, 1 / 3], rtol=1e-14)
        np.testing.assert_allclose(md.best_linear_predictor(m, "dense"), [1 / 3, 1 / 3], rtol=1e-12)

    def test_zero_beta(self, rng):
        m = random_model(rng).with_(beta=np.zeros(3))
        np.testing.assert_array_equal(md.best_linear_predictor(m), np.zeros(m.p))

    @pytest.mark.parametrize("noise", ["dense", "diagonal", "isotropic"])
    def test_woodbury_matches_dense(self, rng, noise):
        m = random_model(rng, p=40, k=4, noise=noise)
        a = md.best_linear_predictor(m, "woodbury")
        b = md.best_linear_predictor(m, "dense")
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(md.sigma_x_apply(m, a), m.sigma_xy, rtol=1e-8, atol=1e-10)

    def test_unknown_method(self):
        with pytest.raises(ContractViolation):
            md.best_linear_predictor(two_feature_model(), "magic")


class TestRisk:
    def test_null_risk(self, rng):
        m = random_model(rng)
        np.testing.assert_allclose(md.risk_exact(m, np.zeros(m.p)), m.sigma_y_sq, rtol=1e-12)

    def test_two_feature_optimal_risk(self):
        m = two_feature_model()
        np.testing.assert_allclose(md.risk_exact(m, md.best_linear_predictor(m)), 4 / 3, rtol=1e-14)

    def test_expanded_form_agrees(self, rng):
        m = random_model(rng)
        a = rng.standard_normal(m.p)
        np.testing.assert_allclose(md.risk_exact(m, a), md.risk_exact_quadform(m, a), rtol=1e-10)

    def test_optimality(self, rng):
        m = random_model(rng)
        star = md.best_linear_predictor(m)
        base = md.risk_exact(m, star)
        for _ in range(10):
            assert md.risk_exact(m, star + 1e-3 * rng.standard_normal(m.p)) >= base

    def test_monte_carlo(self, rng):
        m = random_model(rng, p=5, k=2)
        a = rng.standard_normal(m.p)
        d = sample_dataset(m, 400_000, seed=SeedSpec(3))
        sq = (d.X @ a - d.y) ** 2
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - md.risk_exact(m, a)) <= 4 * se


class TestSummary:
    def test_noiseless_equals_oracle(self, rng):
        s = md.population_summary(random_model(rng, noise="zero"))
        assert s.risk_star == s.oracle_risk
        assert math.isinf(s.xi) and s.inv_xi == 0.0

    def test_two_feature_instance(self):
        s = md.population_summary(two_feature_model())
        np.testing.assert_allclose(s.xi, 2.0)
        np.testing.assert_allclose(s.alpha_star_sx_norm_sq, 2 / 3, rtol=1e-14)
        np.testing.assert_allclose(s.risk_star - 1.0, 1 / 3, rtol=1e-14)
        np.testing.assert_allclose(s.null_risk, 2.0)

    def test_rank_one_snr(self):
        a = np.zeros((4, 1))
        a[0, 0] = 2.0
        m = FactorModel(a, np.eye(1), IsotropicNoise(1.0), np.ones(1))
        s = md.population_summary(m)
        assert s.lambda_k_signal == 4.0 and s.xi == 4.0

    @pytest.mark.parametrize("noise", ["dense", "diagonal", "isotropic"])
    def test_identities_and_bracket(self, rng, noise):
        m = random_model(rng, p=30, k=3, noise=noise)
        s = md.population_summary(m)
        np.testing.assert_allclose(s.null_risk - s.risk_star, s.alpha_star_sx_norm_sq, rtol=1e-9)
        gap = s.risk_star - s.oracle_risk
        assert s.gap_lower - 1e-10 <= gap <= s.gap_upper + 1e-10
        assert s.gap_upper <= s.beta_sz_norm_sq / s.xi * (1 + 1e-10)


class TestExcessDecomposition:
    def test_all_zero(self, rng):
        m = random_model(rng, p=12, k=2).with_(beta=np.zeros(2), sigma_eps=0.0)
        d = sample_dataset(m, 6, seed=1)
        assert all(v == 0 for v in md.excess_decomposition(m, d.X, d.Z, d.eps))

    def test_noiseless(self, rng):
        m = random_model(rng, p=12, k=3, noise="zero")
        d = sample_dataset(m, 8, seed=2)
        dec = md.excess_decomposition(m, d.X, d.Z, d.eps)
        assert dec.B1 == 0 and dec.V1 == 0
        beta_hat = np.linalg.pinv(d.Z) @ d.y
        diff = m.sigma_z_sqrt @ (beta_hat - m.beta)
        np.testing.assert_allclose(dec.exact_excess, diff @ diff, rtol=1e-8)

    def test_matches_risk(self, rng):
        m = random_model(rng, p=15, k=3)
        d = sample_dataset(m, 6, seed=3)
        dec = md.excess_decomposition(m, d.X, d.Z, d.eps)
        a_hat = np.linalg.pinv(d.X) @ d.y
        np.testing.assert_allclose(dec.exact_excess, md.risk_exact(m, a_hat) - m.sigma_eps**2, rtol=1e-8)


class TestDiagnostics:
    def test_isotropic_shift(self, rng):
        m = random_model(rng, p=10, k=3, noise="isotropic")
        diag = md.spectrum_diagnostics(m)
        shifted = np.zeros(10)
        shifted[:3] = np.linalg.eigvalsh(m.abar @ m.abar.T)[::-1][:3]
        np.testing.assert_allclose(diag.eigenvalues, shifted + m.noise_cov.variance, atol=1e-10)
        assert diag.lambda_floor_ok and diag.lambda_k_growth and diag.tail_bounded

    def test_no_signal(self):
        m = FactorModel(np.zeros((3, 1)), np.eye(1), DiagonalNoise(np.array([3.0, 2.0, 1.0])), np.ones(1))
        np.testing.assert_allclose(md.spectrum_diagnostics(m).eigenvalues, [3, 2, 1])

    def test_two_feature_spectrum(self):
        np.testing.assert_allclose(md.spectrum_diagnostics(two_feature_model()).eigenvalues, [3, 1])

    def test_dense_noise_checks_hold(self, rng):
        diag = md.spectrum_diagnostics(random_model(rng, p=20, k=3))
        assert diag.lambda_floor_ok and diag.lambda_k_growth and diag.tail_bounded

    def test_cluster_snr(self):
        m = FactorModel(loading_cluster_assignment(8, 2, [3, 5]), np.eye(2), IsotropicNoise(1.0), np.ones(2))
        assert md.cluster_snr_lower_bound(m) == 3
        assert md.cluster_snr_lower_bound(m) <= md.snr(m) + 1e-12
        single = FactorModel(np.ones((6, 1)), np.eye(1), IsotropicNoise(1.0), np.ones(1))
        assert md.cluster_snr_lower_bound(single) == 6

    def test_cluster_random_assignment_below_snr(self, rng):
        for _ in range(10):
            sizes = rng.multinomial(40 - 4, np.ones(4) / 4) + 1
            m = FactorModel(loading_cluster_assignment(40, 4, sizes), np.eye(4), IsotropicNoise(1.3), np.ones(4))
            assert md.cluster_snr_lower_bound(m) <= md.snr(m) * (1 + 1e-12)

    def test_residual_uncorrelated(self):
        m = two_feature_model()
        check = md.gaussian_residual_check(m, 100_000, seed=7)
        assert check.identity_residual <= 1e-12
        assert check.max_abs_correlation <= 4 / math.sqrt(100_000)

    def test_residual_zero_beta(self, rng):
        m = random_model(rng, p=6, k=2).with_(beta=np.zeros(2))
        assert md.gaussian_residual_check(m, 50_000, seed=1).max_abs_correlation <= 4 / math.sqrt(50_000)
