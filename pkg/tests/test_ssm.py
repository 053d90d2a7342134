#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from parsimony import (
    LatentVarProcess,
    StateSpaceModel,
    autocorr,
    autocov_from_var,
    forecast_weights,
    kldr,
    mse_w,
    solve_one_state_exp_erg,
    solve_one_state_general,
    solve_riccati,
    subjective_moments,
    to_state_space,
)
from parsimony.exceptions import ConfigError
from parsimony.macromodels.nk import fit_shock_process
from parsimony.pseudotrue import _one_state_solution, lambda_max
from parsimony.ssm import kldr_report, prediction_error_covariance


@pytest.fixture
def exact_ar1_model(ar1_acv):
    return to_state_space(solve_one_state_exp_erg(ar1_acv), ar1_acv.gamma0)


@pytest.fixture
def iid_model():
    return StateSpaceModel(A=[[0.0]], B=[[0.0]], Q=[[1.0]], R=[[1 / 0.19]])


@pytest.fixture(scope="module")
def nk_shock_grid(nk_cal):
    """One-state models concentrated over a 41 x 21 grid of (a, eta) for the fitted NK shocks"""
    shocks = fit_shock_process(nk_cal)
    truth = autocov_from_var(
        LatentVarProcess(shocks.transition, shocks.lifting.T, shocks.covariance)
    )
    acs = autocorr(truth)
    points = [(a, eta) for a in np.linspace(-0.99, 0.99, 41) for eta in np.linspace(0, 0.95, 21)]
    models = [
        to_state_space(_one_state_solution(truth, acs, a, eta), truth.gamma0) for a, eta in points
    ]
    lambdas = np.array([lambda_max(acs, a, eta) for a, eta in points])
    return truth, models, lambdas


@pytest.mark.slow
class TestFitOverPersistenceGrid:
    """ssm.kldr, ssm.mse_w over concentrated one-state models"""

    def test_kldr_ranks_like_lambda_max(self, nk_shock_grid):
        truth, models, lambdas = nk_shock_grid
        divergences = np.array([kldr(model, truth) for model in models])
        order = np.argsort(lambdas)
        assert np.all(np.diff(divergences[order]) <= 1e-9)
        assert np.argmin(divergences) == np.argmax(lambdas)

    def test_weighted_mse_and_kldr_share_the_minimizer(self, nk_shock_grid):
        truth, models, _ = nk_shock_grid
        best = to_state_space(solve_one_state_general(truth), truth.gamma0)
        W = np.linalg.inv(solve_riccati(best).SigmaY)
        candidates = models + [best]
        errors = np.array([mse_w(model, truth, W) for model in candidates])
        divergences = np.array([kldr(model, truth) for model in candidates])
        assert errors.min() >= errors[-1] - 1e-9
        assert divergences.min() >= divergences[-1] - 1e-9


class TestStateSpaceModel:
    """ssm.StateSpaceModel"""

    def test_explosive_transition(self):
        with pytest.raises(ValueError):
            StateSpaceModel(A=[[1.0]], B=[[1.0]], Q=[[1.0]], R=[[0.0]])

    def test_state_noise_must_be_positive_definite(self):
        with pytest.raises(ValueError):
            StateSpaceModel(A=[[0.5]], B=[[1.0]], Q=[[0.0]], R=[[1.0]])

    def test_singular_subjective_variance(self):
        with pytest.raises(ValueError):
            StateSpaceModel(A=[[0.5]], B=[[1.0, 1.0]], Q=[[1.0]], R=np.zeros((2, 2)))

    def test_no_state_no_dynamics(self):
        model = StateSpaceModel(A=[[0.0]], B=[[0.0, 0.0]], Q=[[1.0]], R=np.diag([2.0, 3.0]))
        np.testing.assert_allclose(subjective_moments(model, 2).gamma0, np.diag([2.0, 3.0]))


class TestRiccati:
    """ssm.solve_riccati"""

    def test_unobserved_state(self):
        model = StateSpaceModel(A=[[0.5]], B=[[0.0]], Q=[[1.0]], R=[[1.0]])
        filt = solve_riccati(model)
        assert filt.SigmaZ[0, 0] == pytest.approx(1 / 0.75, rel=1e-10)
        assert filt.K[0, 0] == 0

    def test_markovian_in_observables(self, exact_ar1_model):
        filt = solve_riccati(exact_ar1_model)
        np.testing.assert_allclose(filt.closed_loop, 0.0, atol=1e-10)

    def test_residual_and_stability(self):
        model = StateSpaceModel(
            A=[[0.7, 0.2], [0.0, 0.4]],
            B=[[1.0, 0.5], [0.3, 1.0]],
            Q=[[1.0, 0.1], [0.1, 0.5]],
            R=[[0.4, 0.0], [0.0, 0.2]],
        )
        filt = solve_riccati(model)
        A, B, Q, R, S = model.A, model.B, model.Q, model.R, filt.SigmaZ
        gain_core = np.linalg.inv(B.T @ S @ B + R)
        residual = S - A @ (S - S @ B @ gain_core @ B.T @ S) @ A.T - Q
        assert np.linalg.norm(residual) < 1e-10
        np.testing.assert_allclose(filt.K, A @ S @ B @ gain_core, atol=1e-10)
        assert np.abs(np.linalg.eigvals(filt.closed_loop)).max() < 1


class TestForecastWeights:
    """ssm.forecast_weights"""

    def test_exponentially_ergodic_model(self, exact_ar1_model):
        weights = forecast_weights(exact_ar1_model, 3)
        for s in (1, 2, 5):
            assert weights.weights(s)[0, 0, 0] == pytest.approx(0.9**s, rel=1e-9)
            np.testing.assert_allclose(weights.weights(s)[1:], 0.0, atol=1e-10)

    def test_forecast_from_history(self, exact_ar1_model):
        weights = forecast_weights(exact_ar1_model, 3)
        history = np.array([[2.0], [5.0], [-1.0]])
        np.testing.assert_allclose(weights.forecast(history, 2), [0.81 * 2.0], rtol=1e-9)

    def test_static_model_forecasts_nothing(self, iid_model):
        weights = forecast_weights(iid_model, 4)
        np.testing.assert_allclose(weights.weights(1), 0.0)

    def test_horizon_must_be_positive(self, exact_ar1_model):
        with pytest.raises(ValueError):
            forecast_weights(exact_ar1_model, 2).weights(0)


class TestFit:
    """ssm.kldr, ssm.mse_w"""

    def test_correct_specification_scores_zero(self, exact_ar1_model, ar1_acv):
        assert abs(kldr(exact_ar1_model, ar1_acv, mode="exact_gaussian")) < 1e-9

    def test_iid_model_against_ar1(self, iid_model, ar1_acv):
        expected = -0.5 * np.log(1 - 0.81)
        assert kldr(iid_model, ar1_acv, mode="exact_gaussian") == pytest.approx(expected, rel=1e-9)

    def test_relative_mode_ranks_models(self, exact_ar1_model, iid_model, ar1_acv):
        assert kldr(exact_ar1_model, ar1_acv) < kldr(iid_model, ar1_acv)

    def test_truncated_truth_reports_its_bound(self, iid_model, ar1_acv):
        truncated = type(ar1_acv)(ar1_acv.gammas, ar1_acv.tail_rate)
        report = kldr_report(iid_model, truncated)
        assert report.value == pytest.approx(kldr(iid_model, ar1_acv), rel=1e-9)
        assert report.truncation_bound >= 0

    def test_truncated_error_covariance(self, exact_ar1_model, ar1_acv):
        truncated = type(ar1_acv)(ar1_acv.gammas, ar1_acv.tail_rate)
        exact, _ = prediction_error_covariance(exact_ar1_model, ar1_acv)
        approximate, bound = prediction_error_covariance(exact_ar1_model, truncated)
        np.testing.assert_allclose(approximate, exact, atol=1e-9)
        assert bound < 1e-6

    def test_exact_mode_needs_the_latent_process(self, iid_model, ar1_acv):
        truncated = type(ar1_acv)(ar1_acv.gammas, ar1_acv.tail_rate)
        with pytest.raises(ValueError):
            kldr(iid_model, truncated, mode="exact_gaussian")

    def test_unknown_mode(self, iid_model, ar1_acv):
        with pytest.raises(ConfigError):
            kldr(iid_model, ar1_acv, mode="bits")

    def test_mse_of_the_exact_model(self, exact_ar1_model, ar1_acv):
        assert mse_w(exact_ar1_model, ar1_acv, [[1.0]]) == pytest.approx(1.0, rel=1e-9)
        assert mse_w(exact_ar1_model, ar1_acv, [[3.0]]) == pytest.approx(3.0, rel=1e-9)

    def test_mse_of_the_iid_model(self, iid_model, ar1_acv):
        assert mse_w(iid_model, ar1_acv, [[1.0]]) == pytest.approx(1 / 0.19, rel=1e-9)

    def test_mse_weight_must_be_symmetric(self, example1_acv):
        model = StateSpaceModel(A=[[0.0]], B=[[0.0, 0.0, 0.0]], Q=[[1.0]], R=np.eye(3))
        with pytest.raises(ValueError):
            mse_w(model, example1_acv, [[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def test_nonnegative_for_misspecified_models(self, example1_acv):
        model = to_state_space(solve_one_state_exp_erg(example1_acv), example1_acv.gamma0)
        assert kldr(model, example1_acv, mode="exact_gaussian") >= -1e-9


class TestSubjectiveMoments:
    """ssm.subjective_moments"""

    def test_one_state_matches_the_variance(self, random_acv):
        model = to_state_space(solve_one_state_exp_erg(random_acv), random_acv.gamma0)
        np.testing.assert_allclose(
            subjective_moments(model, 2).gamma0, random_acv.gamma0, atol=1e-8
        )

    def test_exact_model_matches_every_lag(self, exact_ar1_model, ar1_acv):
        subjective = subjective_moments(exact_ar1_model, 5)
        np.testing.assert_allclose(subjective.gammas, ar1_acv.gammas[:6], rtol=1e-9)
