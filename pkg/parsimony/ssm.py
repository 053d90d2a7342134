#! /usr/bin/env python
"""Subjective state-space models and how well they fit a true process"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, NonConvergent, NumericalFailure, SupportMismatch
from .linalg import as_matrix, condition_number, spectral_radius, sym
from .procspec import (
    CONDITION_CAP,
    AutocovSeq,
    LatentVarProcess,
    autocov_from_var,
    lyapunov_solve,
)
from .settings import config

logger = logging.getLogger(__name__)

RICCATI_TOLERANCE = config["ssm"]["riccati-tolerance"]
RICCATI_MAX_ITER = config["ssm"]["riccati-max-iter"]
PINV_RCOND = config["ssm"]["pinv-rcond"]


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Subjective model z_t = A z_{t-1} + w_t, y_t = B' z_t + v_t

    Parameters
    ----------
    A
        d x d convergent transition
    B
        d x n loading of the observables
    Q
        d x d positive definite state noise covariance
    R
        n x n positive semi-definite observation noise covariance
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(self.R, "R")
        d, n = B.shape
        if A.shape != (d, d) or Q.shape != (d, d):
            raise ValueError(f"A and Q must be {d}x{d}, got {A.shape} and {Q.shape}")
        if R.shape != (n, n):
            raise ValueError(f"R must be {n}x{n}, got {R.shape}")
        if spectral_radius(A) >= 1:
            raise ValueError(f"A must be convergent, spectral radius is {spectral_radius(A)!r}")
        if np.linalg.eigvalsh(sym(Q)).min() <= 0:
            raise ValueError("Q must be positive definite")
        scale = max(1.0, np.abs(R).max())
        if np.linalg.eigvalsh(sym(R)).min() < -1e-10 * scale:
            raise ValueError("R must be positive semi-definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", sym(Q))
        object.__setattr__(self, "R", sym(R))
        cond = condition_number(self.subjective_gamma0)
        if not cond < CONDITION_CAP:
            raise ValueError(f"Subjective variance of y is singular (condition number {cond:.3e})")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @cached_property
    def state_variance(self) -> np.ndarray:
        return lyapunov_solve(self.A, self.Q)

    @property
    def subjective_gamma0(self) -> np.ndarray:
        return sym(self.B.T @ self.state_variance @ self.B + self.R)

    def as_process(self) -> LatentVarProcess:
        """The model as a latent VAR over (z_t, v_t)"""
        return LatentVarProcess(
            F=scipy.linalg.block_diag(self.A, np.zeros((self.n, self.n))),
            H=np.vstack([self.B, np.eye(self.n)]),
            Sigma=scipy.linalg.block_diag(self.Q, self.R),
        )


@dataclass(frozen=True, eq=False)
class SteadyStateFilter:
    """Steady-state Kalman filter of a StateSpaceModel

    SigmaZ is the variance of z_t given y up to t-1 and SigmaY the variance of
    the one-step prediction error of y_t.
    """

    K: np.ndarray
    SigmaZ: np.ndarray
    SigmaY: np.ndarray
    closed_loop: np.ndarray
    iterations: int = 0


def _riccati(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = RICCATI_TOLERANCE,
    max_iter: int = RICCATI_MAX_ITER,
) -> SteadyStateFilter:
    sigma = Q.copy()
    for iteration in range(1, max_iter + 1):
        gain_core = np.linalg.pinv(B.T @ sigma @ B + R, rcond=PINV_RCOND, hermitian=True)
        update = sym(A @ (sigma - sigma @ B @ gain_core @ B.T @ sigma) @ A.T + Q)
        change = np.linalg.norm(update - sigma)
        sigma = update
        if change < tol * max(1.0, np.linalg.norm(sigma)):
            break
    else:
        raise NonConvergent(f"Riccati iteration did not converge after {max_iter} steps")

    sigma_y = sym(B.T @ sigma @ B + R)
    gain_core = np.linalg.pinv(sigma_y, rcond=PINV_RCOND, hermitian=True)
    K = A @ sigma @ B @ gain_core
    residual = np.linalg.norm(
        sigma - A @ (sigma - sigma @ B @ gain_core @ B.T @ sigma) @ A.T - Q
    )
    if residual > 1e-10 * max(1.0, np.linalg.norm(sigma)):
        raise NumericalFailure(f"Riccati residual {residual:.3e} is too large")
    closed_loop = A - K @ B.T
    if spectral_radius(closed_loop) >= 1:
        raise NumericalFailure("Steady-state filter is not stable")
    logger.debug(f"Riccati iteration converged after {iteration} steps")
    return SteadyStateFilter(
        K=K, SigmaZ=sigma, SigmaY=sigma_y, closed_loop=closed_loop, iterations=iteration
    )


def solve_riccati(model: StateSpaceModel) -> SteadyStateFilter:
    """Steady-state Kalman filter by fixed-point iteration on the Riccati equation"""
    return _riccati(model.A, model.B, model.Q, model.R)


@dataclass(frozen=True, eq=False)
class ForecastWeights:
    """Forecast operator of a filtered model

    E_t[y_{t+s}] = B'A^{s-1} sum_tau psi[tau] y_{t-tau}, psi[tau] = (A - KB')^tau K
    """

    A: np.ndarray
    B: np.ndarray
    psi: np.ndarray

    @property
    def tau_max(self) -> int:
        return self.psi.shape[0] - 1

    def horizon_map(self, s: int) -> np.ndarray:
        if s < 1:
            raise ValueError(f"Forecast horizon must be at least 1, got {s!r}")
        return self.B.T @ np.linalg.matrix_power(self.A, s - 1)

    def weights(self, s: int) -> np.ndarray:
        """n x n coefficients on y_t, y_{t-1}, ..., y_{t-tau_max} for horizon s"""
        return self.horizon_map(s) @ self.psi

    def forecast(self, history: np.ndarray, s: int) -> np.ndarray:
        """Forecast of y_{t+s} from rows y_t, y_{t-1}, ... of history"""
        history = np.atleast_2d(history)[: self.tau_max + 1]
        return np.einsum("tij,tj->i", self.weights(s)[: len(history)], history)


def forecast_weights(model: StateSpaceModel, tau_max: int) -> ForecastWeights:
    filt = solve_riccati(model)
    psi = np.empty((tau_max + 1, model.d, model.n))
    psi[0] = filt.K
    for tau in range(1, tau_max + 1):
        psi[tau] = filt.closed_loop @ psi[tau - 1]
    return ForecastWeights(A=model.A, B=model.B, psi=psi)


def subjective_moments(model: StateSpaceModel, lags: int) -> AutocovSeq:
    """Autocovariances of y implied by the model itself"""
    return autocov_from_var(model.as_process(), lags)


def innovation_covariance(process: LatentVarProcess) -> np.ndarray:
    """Variance of the one-step prediction error of y under full information"""
    filt = _riccati(process.F, process.H, process.Sigma, np.zeros((process.n, process.n)))
    return filt.SigmaY


def prediction_error_covariance(
    model: StateSpaceModel, truth: AutocovSeq, filt: Optional[SteadyStateFilter] = None
) -> Tuple[np.ndarray, float]:
    """E[e e'] of the model's one-step errors e_t = y_t - B'z_t|t-1 under the truth

    Returns the covariance and a bound on the error from truncating lag sums
    (zero when the truth carries its latent VAR).
    """
    if truth.n != model.n:
        raise ValueError(f"Model has {model.n} observables, truth has {truth.n}")
    filt = filt or solve_riccati(model)
    proc = truth.process
    if proc is not None:
        F, H, Sigma = proc.F, proc.H, proc.Sigma
        m, d = proc.m, model.d
        joint_transition = np.block(
            [[F, np.zeros((m, d))], [filt.K @ H.T @ F, filt.closed_loop]]
        )
        joint_impact = np.vstack([np.eye(m), filt.K @ H.T])
        joint_variance = lyapunov_solve(joint_transition, joint_impact @ Sigma @ joint_impact.T)
        loading = np.hstack([H.T @ F, -model.B.T])
        return sym(loading @ joint_variance @ loading.T + H.T @ Sigma @ H), 0.0

    # Phi_tau = B'L^{tau-1}K, kept while it is not negligible
    phis = [model.B.T @ filt.K]
    while len(phis) < truth.L:
        phis.append(model.B.T @ np.linalg.matrix_power(filt.closed_loop, len(phis)) @ filt.K)
        if np.abs(phis[-1]).max() <= 1e-14 * max(np.abs(phis[0]).max(), 1e-300):
            break
    phis = np.array(phis)
    K = len(phis)
    gammas = truth.gammas
    cross = np.einsum("tij,tkj->ik", gammas[1 : K + 1], phis)
    lags = np.arange(K)
    diff = lags[None, :] - lags[:, None]
    blocks = gammas[np.abs(diff)]
    blocks = np.where((diff >= 0)[..., None, None], blocks, np.swapaxes(blocks, -1, -2))
    quadratic = np.einsum("sab,stbc,tdc->ad", phis, blocks, phis)
    covariance = sym(truth.gamma0 - cross - cross.T + quadratic)

    tail = truth.tail_rate ** (truth.L + 1) / (1 - truth.tail_rate)
    phi_mass = 1 + np.sum(np.linalg.norm(phis, ord=2, axis=(1, 2)))
    bound = float(np.linalg.norm(truth.gamma0, 2) * tail * phi_mass**2)
    return covariance, bound


@dataclass(frozen=True)
class KldrReport:
    value: float
    truncation_bound: float
    mode: str


def kldr_report(model: StateSpaceModel, truth: AutocovSeq, mode: str = "relative") -> KldrReport:
    """Kullback-Leibler divergence rate of the model from the truth

    Parameters
    ----------
    model
        Subjective model
    truth
        True autocovariances. In 'exact_gaussian' mode they must carry their
        latent VAR so that the entropy rate of the truth is available.
    mode
        'relative' drops every term that does not depend on the model;
        'exact_gaussian' adds the entropy rate of the truth so that a correctly
        specified model scores zero.
    """
    if mode not in ("relative", "exact_gaussian"):
        raise ConfigError(f"Unknown KLDR mode {mode!r}")
    if mode == "exact_gaussian" and truth.process is None:
        raise ValueError("exact_gaussian mode needs a truth built from a latent process")

    filt = solve_riccati(model)
    errors, bound = prediction_error_covariance(model, truth, filt)
    values, vectors = np.linalg.eigh(filt.SigmaY)
    support = values > PINV_RCOND * values.max()
    null = vectors[:, ~support]
    if null.size and np.abs(null.T @ errors @ null).max() > 1e-10 * np.abs(errors).max():
        raise SupportMismatch("Subjective model rules out directions the truth visits")
    inv_sigma = (vectors[:, support] / values[support]) @ vectors[:, support].T
    n = int(support.sum())
    log_det = float(np.sum(np.log(values[support])))
    trace = float(np.trace(inv_sigma @ errors))

    if mode == "relative":
        value = 0.5 * (n * np.log(2 * np.pi) + log_det + trace)
    else:
        _, true_log_det = np.linalg.slogdet(innovation_covariance(truth.process))
        value = 0.5 * (log_det - true_log_det + trace - n)
    return KldrReport(
        value=float(value), truncation_bound=0.5 * bound * np.abs(inv_sigma).max(), mode=mode
    )


def kldr(model: StateSpaceModel, truth: AutocovSeq, mode: str = "relative") -> float:
    return kldr_report(model, truth, mode).value


def mse_w(model: StateSpaceModel, truth: AutocovSeq, W: np.ndarray) -> float:
    """Weighted mean squared one-step forecast error E[e' W e] under the truth"""
    W = as_matrix(W, "W")
    if np.abs(W - W.T).max() > 1e-10 * max(1.0, np.abs(W).max()):
        raise ValueError("W must be symmetric")
    errors, _ = prediction_error_covariance(model, truth)
    return float(np.trace(W @ errors))


@dataclass(frozen=True, eq=False)
class OneStatePseudoTrue:
    """Pseudo-true one-state model

    Forecasts are E_t[y_{t+s}] = a^s (1 - eta) q p' sum_tau (a eta)^tau y_{t-tau}.

    Parameters
    ----------
    a
        Persistence of the subjective state
    eta
        Weight of past observations in the state estimate
    p
        Relative attention: the state estimate loads on p' y
    q
        Relative sensitivity: forecasts move along q
    lambda_max
        Largest eigenvalue of Omega(a, eta)
    ambiguous
        True when -a was an equally good persistence
    """

    a: float
    eta: float
    p: np.ndarray
    q: np.ndarray
    lambda_max: float
    ambiguous: bool = False

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if abs(self.a) >= 1 and self.eta < 1:
            raise ValueError(f"Persistence must lie inside (-1, 1), got {self.a!r}")
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        if abs(p @ q - 1) > 1e-8:
            raise ValueError(f"Attention and sensitivity must satisfy p'q = 1, got {p @ q!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "lambda_max", float(self.lambda_max))

    @property
    def n(self) -> int:
        return len(self.p)

    def weights(self, s: int, tau_max: int) -> np.ndarray:
        """Coefficients on y_t .. y_{t-tau_max} of the s-step forecast"""
        taus = np.arange(tau_max + 1)
        scale = self.a ** (s + taus) * (1 - self.eta) * self.eta**taus
        return scale[:, None, None] * np.outer(self.q, self.p)

    def forecast_matrix(self, s: int) -> np.ndarray:
        """Coefficient on y_t of the s-step forecast"""
        return self.weights(s, 0)[0]

    def discounted_forecast(self, beta: float) -> np.ndarray:
        """Coefficient on y_t of sum_{s>=1} beta^s E_t[y_{t+s}]"""
        return (1 - self.eta) * self.a * beta / (1 - self.a * beta) * np.outer(self.q, self.p)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "eta": self.eta,
            "p": self.p.tolist(),
            "q": self.q.tolist(),
            "lambda_max": self.lambda_max,
            "ambiguous": self.ambiguous,
        }


@dataclass(frozen=True, eq=False)
class MioComponent:
    a: float
    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True, eq=False)
class MioDStateModel:
    """Markovian-in-observables d-state model

    E_t[y_{t+s}] = sum_i a_i^s q_i p_i' y_t
    """

    components: Tuple[MioComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        persistence = np.abs(self.a)
        if np.any(persistence >= 1):
            raise ValueError("Every component persistence must lie inside (-1, 1)")
        if np.any(np.diff(persistence) > 1e-12):
            raise ValueError("Components must be sorted by decreasing |a|")

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def a(self) -> np.ndarray:
        return np.array([c.a for c in self.components])

    @property
    def P(self) -> np.ndarray:
        return np.column_stack([c.p for c in self.components])

    @property
    def Q(self) -> np.ndarray:
        return np.column_stack([c.q for c in self.components])

    def forecast_matrix(self, s: int) -> np.ndarray:
        return (self.Q * self.a**s) @ self.P.T

    def discounted_forecast(self, beta: float) -> np.ndarray:
        """sum_{s>=1} beta^s E_t[y_{t+s}] as a matrix on y_t"""
        return (self.Q * (self.a * beta / (1 - self.a * beta))) @ self.P.T

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "components": [
                {"a": float(c.a), "p": np.asarray(c.p).tolist(), "q": np.asarray(c.q).tolist()}
                for c in self.components
            ],
        }
