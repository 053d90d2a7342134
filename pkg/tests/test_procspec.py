#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest
from conftest import random_invertible, random_truth

from parsimony import (
    AutocovSeq,
    LatentVarProcess,
    autocorr,
    autocov_from_spec,
    autocov_from_var,
    check_exponential_ergodicity,
    decompose_persistence,
    lyapunov_solve,
    rank_reduce,
    transform_process,
)
from parsimony.exceptions import ConfigError, NonConvergent, RankDeficient, SingularGamma0
from parsimony.macromodels import LinearLaw, simulate
from parsimony.macromodels.nk import fit_shock_process
from parsimony.procspec import AutocorrSeq, sample_autocov, truncation_lag


class TestLyapunov:
    """procspec.lyapunov_solve"""

    def test_scalar(self):
        assert lyapunov_solve([[0.9]], [[1.0]])[0, 0] == pytest.approx(1 / 0.19, rel=1e-12)

    def test_zero_transition_returns_sigma(self):
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(lyapunov_solve(np.zeros((2, 2)), S), S, atol=1e-14)

    def test_diagonal(self):
        V = lyapunov_solve(np.diag([0.95, 0.5]), np.eye(2))
        np.testing.assert_allclose(V, np.diag([1 / (1 - 0.95**2), 1 / 0.75]), rtol=1e-12)

    def test_residual(self):
        F = np.array([[0.5, 0.3], [-0.2, 0.4]])
        Sigma = np.array([[1.0, 0.2], [0.2, 0.5]])
        V = lyapunov_solve(F, Sigma)
        assert np.linalg.norm(V - F @ V @ F.T - Sigma) < 1e-10 * np.linalg.norm(Sigma)
        np.testing.assert_allclose(V, V.T)

    def test_unit_root_is_not_convergent(self):
        with pytest.raises(NonConvergent) as excinfo:
            lyapunov_solve([[1.0]], [[1.0]])
        assert "spectral radius" in str(excinfo.value)


class TestLatentVarProcess:
    """procspec.LatentVarProcess"""

    def test_explosive_transition(self):
        with pytest.raises(ConfigError):
            LatentVarProcess([[1.2]], [[1.0]], [[1.0]])

    def test_shapes_must_match(self):
        with pytest.raises(ConfigError):
            LatentVarProcess(np.eye(2), [[1.0]], np.eye(2))

    def test_sigma_must_be_psd(self):
        with pytest.raises(ConfigError):
            LatentVarProcess([[0.5]], [[1.0]], [[-1.0]])

    def test_arma_lag_one_autocorrelation(self):
        phi, theta = 0.6, 0.3
        acv = autocov_from_var(LatentVarProcess.from_arma([phi], [theta]), L=3)
        expected = (phi + theta) * (1 + phi * theta) / (1 + 2 * phi * theta + theta**2)
        assert acv.gamma1[0, 0] / acv.gamma0[0, 0] == pytest.approx(expected, rel=1e-10)
        assert acv.lag(2)[0, 0] / acv.gamma0[0, 0] == pytest.approx(phi * expected, rel=1e-10)

    def test_arma_lengths_must_match(self):
        with pytest.raises(ConfigError):
            LatentVarProcess.from_arma([0.5, 0.2], [0.3])


class TestAutocovariances:
    """procspec.autocov_from_var, procspec.autocov_from_spec"""

    def test_ar1(self):
        acv = autocov_from_var(LatentVarProcess([[0.9]], [[1.0]], [[1.0]]), L=2)
        np.testing.assert_allclose(
            acv.gammas[:, 0, 0], [1 / 0.19, 0.9 / 0.19, 0.81 / 0.19], rtol=1e-12
        )
        assert acv.L == 2
        assert acv.tail_rate > 0.9

    def test_diagonal_truth(self, example1_acv):
        alphas = np.array([0.9, 0.6, 0.3])
        for lag in range(4):
            expected = np.diag(alphas**lag / (1 - alphas**2))
            np.testing.assert_allclose(example1_acv.lag(lag), expected, atol=1e-12)

    def test_lags_beyond_the_truncation(self, ar1_acv):
        assert ar1_acv.lag(ar1_acv.L + 5)[0, 0] == pytest.approx(0.9 ** (ar1_acv.L + 5) / 0.19)
        np.testing.assert_allclose(ar1_acv.lag(-1), ar1_acv.gamma1.T)

    def test_truncation_lag(self):
        assert 0.9 ** truncation_lag(0.9) < 1e-12
        assert truncation_lag(0.0) == 1

    def test_singular_gamma0(self):
        proc = LatentVarProcess([[0.9]], [[1.0, 1.0]], [[1.0]])
        with pytest.raises(SingularGamma0):
            autocov_from_var(proc)

    def test_spec_forms(self):
        acv = autocov_from_spec({"gammas": [[[2.0]], [[1.0]]], "tail_rate": 0.5})
        assert acv.L == 1
        assert acv.tail_rate == 0.5
        arma = autocov_from_spec({"arma": {"phi": [0.9, 0.5], "theta": [0.3, 0.3]}})
        assert arma.n == 2

    def test_spec_rejects_unknown_keys(self):
        with pytest.raises(ConfigError) as excinfo:
            autocov_from_spec({"F": [[0.5]], "H": [[1.0]]})
        assert "F, H and Sigma" in str(excinfo.value)
        with pytest.raises(ConfigError):
            autocov_from_spec({"arma": {"phi": [0.5], "theta": [0.1], "mu": [0.0]}})

    def test_asymmetric_gamma0(self):
        with pytest.raises(ConfigError):
            AutocovSeq(np.array([[[1.0, 0.5], [0.0, 1.0]], [[0.1, 0.0], [0.0, 0.1]]]))

    @pytest.mark.slow
    def test_agrees_with_a_simulated_path(self):
        law = LinearLaw([[0.9]], [[1.0]], [[1.0]], [[1.0]], ("y",), ("e",))
        path = simulate(law, 10**6, seed=7)
        mean, se = sample_autocov(path.to_numpy(), 3)
        truth = autocov_from_var(LatentVarProcess([[0.9]], [[1.0]], [[1.0]]), L=3)
        assert np.all(np.abs(mean - truth.gammas) <= 3 * se)


class TestAutocorrelations:
    """procspec.autocorr, procspec.check_exponential_ergodicity"""

    def test_white_noise(self, white_noise_acv):
        np.testing.assert_allclose(autocorr(white_noise_acv).cs, 0.0, atol=1e-14)

    def test_ar1(self, ar1_acv):
        cs = autocorr(ar1_acv).cs[:5, 0, 0]
        np.testing.assert_allclose(cs, 0.9 ** np.arange(1, 6), rtol=1e-10)

    def test_rounded_nk_moments_are_rejected(self, nk_cal):
        acv = AutocovSeq(np.stack([nk_cal.shock_gamma0, nk_cal.shock_gamma1]))
        with pytest.raises(ValueError, match="spectral radius"):
            autocorr(acv)

    def test_fitted_nk_shocks(self, nk_cal):
        shocks = fit_shock_process(nk_cal)
        gamma0 = lyapunov_solve(shocks.transition, shocks.covariance)
        acv = AutocovSeq(np.stack([gamma0, shocks.transition @ gamma0]))
        c1 = autocorr(acv).c1
        np.testing.assert_allclose(c1, c1.T)
        vector = np.ones(3)
        for _ in range(2000):
            vector = c1 @ vector
            vector /= np.linalg.norm(vector)
        assert abs(vector @ c1 @ vector) == pytest.approx(autocorr(acv).radii()[0], rel=1e-8)
        assert autocorr(acv).radii()[0] < 1

    def test_later_lag_above_one(self):
        with pytest.raises(ValueError, match="lag 2"):
            AutocorrSeq(np.array([0.5, 1.2]))

    def test_ar1_is_exponentially_ergodic(self, ar1_acv):
        report = check_exponential_ergodicity(autocorr(ar1_acv))
        assert report.is_exp_ergodic
        assert report.first_violation_lag is None
        np.testing.assert_allclose(report.margins, 0.0, atol=1e-12)

    def test_arma_pair_is_exponentially_ergodic(self, example2_acv):
        assert check_exponential_ergodicity(autocorr(example2_acv)).is_exp_ergodic

    def test_two_factor_fails_at_lag_two(self, two_factor_acv):
        report = check_exponential_ergodicity(autocorr(two_factor_acv))
        assert not report.is_exp_ergodic
        assert report.first_violation_lag == 2
        assert report.radii[0] == pytest.approx(0.7)
        assert report.radii[1] == pytest.approx(0.53)
        frame = report.to_frame()
        assert list(frame.columns) == ["lag", "rho_Cl", "rho_C1_pow_l", "margin"]
        assert frame.loc[1, "margin"] == pytest.approx(0.49 - 0.53)

    def test_max_lag(self, two_factor_acv):
        report = check_exponential_ergodicity(autocorr(two_factor_acv), max_lag=1)
        assert report.is_exp_ergodic
        assert len(report.margins) == 1

    def test_spectral_radii_stay_below_one(self, random_acv):
        radii = autocorr(random_acv).radii()
        assert radii[0] < 1
        assert np.all(radii <= 1 + 1e-12)


class TestTransforms:
    """procspec.transform_process, procspec.rank_reduce"""

    def test_identity(self, random_acv):
        transformed = transform_process(random_acv, np.eye(3))
        np.testing.assert_allclose(transformed.gammas, random_acv.gammas)

    def test_scaling_leaves_autocorrelations(self, ar1_acv):
        scaled = transform_process(ar1_acv, [[2.0]])
        np.testing.assert_allclose(scaled.gammas, 4 * ar1_acv.gammas)
        np.testing.assert_allclose(autocorr(scaled).cs, autocorr(ar1_acv).cs, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_invertible_transform_keeps_spectral_radii(self, random_acv, seed):
        T = random_invertible(seed)
        transformed = transform_process(random_acv, T)
        np.testing.assert_allclose(
            autocorr(transformed).radii(), autocorr(random_acv).radii(), atol=1e-9
        )

    def test_collapsing_transform(self, example1_acv):
        with pytest.raises(RankDeficient):
            transform_process(example1_acv, [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])

    def test_rank_reduce_nonsingular(self, random_acv):
        reduced, lifting = rank_reduce(random_acv)
        assert reduced is random_acv
        np.testing.assert_array_equal(lifting, np.eye(3))

    def test_rank_reduce_duplicated_observable(self):
        proc = LatentVarProcess([[0.9]], [[1.0, 1.0]], [[1.0]])
        reduced, lifting = rank_reduce(autocov_from_var(proc, check=False))
        assert reduced.n == 1
        np.testing.assert_allclose(lifting, [[1.0], [1.0]])
        np.testing.assert_allclose(lifting @ reduced.gamma1 @ lifting.T, 0.9 / 0.19)

    def test_rank_reduce_zero_process(self):
        with pytest.raises(SingularGamma0):
            rank_reduce(AutocovSeq(np.zeros((2, 2, 2))))


class TestPersistenceDecomposition:
    """procspec.decompose_persistence"""

    def test_independent_ar1s(self):
        proc = LatentVarProcess(np.diag([0.5, 0.9]), np.eye(2), np.eye(2))
        decomposition = decompose_persistence(autocov_from_var(proc))
        np.testing.assert_allclose(decomposition.rhos, [0.9, 0.5], atol=1e-12)
        np.testing.assert_allclose(decomposition.P[:, 0], [0.0, np.sqrt(0.19)], atol=1e-12)
        np.testing.assert_allclose(decomposition.Q[:, 0], [0.0, 1 / np.sqrt(0.19)], atol=1e-12)

    def test_most_persistent_element(self, example1_acv):
        component = decompose_persistence(example1_acv).components[0]
        assert component.rho == pytest.approx(0.9)
        np.testing.assert_allclose(component.p, [np.sqrt(0.19), 0.0, 0.0], atol=1e-12)

    def test_reconstruction_and_unit_variance(self, random_acv):
        decomposition = decompose_persistence(random_acv)
        y = np.random.default_rng(3).standard_normal((100, 3))
        residual = np.linalg.norm(decomposition.reconstruct(y) - y, axis=1)
        assert np.all(residual < 1e-9 * np.linalg.norm(y, axis=1))
        variances = np.einsum("ik,ij,jk->k", decomposition.P, random_acv.gamma0, decomposition.P)
        np.testing.assert_allclose(variances, 1.0, atol=1e-10)
        assert np.all(np.diff(np.abs(decomposition.rhos)) <= 1e-12)

    def test_white_noise(self, white_noise_acv):
        decomposition = decompose_persistence(white_noise_acv)
        assert decomposition.rhos[0] == 0
        np.testing.assert_allclose(decomposition.reconstruct([[2.5]]), [[2.5]])

    def test_to_frame(self, example1_acv):
        frame = decompose_persistence(example1_acv).to_frame()
        assert list(frame.columns[:2]) == ["component", "rho"]
        assert len(frame) == 3
        assert {"p_1", "q_3"} <= set(frame.columns)


def test_random_truths_are_valid():
    for seed in range(3):
        acv = autocov_from_var(random_truth(seed))
        np.testing.assert_allclose(acv.gamma1, acv.gamma1.T, atol=1e-10)
