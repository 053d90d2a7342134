#! /usr/bin/env python
"""General against partial equilibrium economies with agents using m.i.o. d-state models

Observables are y_t = H'f_t + g x_t, actions x_t = b'y_t + E_t[sum_s beta^s c'y_{t+s}]
and the shocks f_t are independent AR(1) processes with persistences alphas and
innovation standard deviations sigmas. The partial equilibrium economy drops
the feedback g x_t.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..exceptions import ConfigError, InvalidD, RankDeficientH
from ..procspec import LatentVarProcess, autocov_from_var, rank_reduce
from ..pseudotrue import solve_mio_d_state
from ..ssm import MioDStateModel
from .fixedpoint import TOLERANCE, solve_fixed_point
from .laws import LinearLaw

logger = logging.getLogger(__name__)


def _vector(value, name: str, size: Optional[int] = None) -> np.ndarray:
    vector = np.atleast_1d(np.asarray(value, dtype=float))
    if vector.ndim != 1 or (size is not None and vector.shape != (size,)):
        raise ConfigError(f"{name} must be a vector of length {size}, got shape {vector.shape}")
    return vector


def _check_economy(H, alphas, beta, d):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m, n = H.shape
    rank = np.linalg.matrix_rank(H)
    if m > n or rank < m:
        raise RankDeficientH(f"H must have full row rank {m}, got rank {rank}")
    alphas = _vector(alphas, "alphas", m)
    discount = beta * np.abs(alphas).max()
    if discount >= 1:
        raise ConfigError(f"beta * max|alpha| must be below one, got {discount!r}")
    if np.any(np.diff(np.abs(alphas)) > 0):
        raise ConfigError(
            f"alphas must be sorted by decreasing absolute value, got {alphas.tolist()}"
        )
    if not 1 <= d <= m:
        raise InvalidD(f"d must lie between 1 and {m}, got {d!r}")
    return H, alphas


def pe_action_loading(
    H: np.ndarray,
    b: Sequence[float],
    c: Sequence[float],
    beta: float,
    alphas: Sequence[float],
    d: int,
) -> np.ndarray:
    """Loading X of the partial equilibrium action x_t = X'y_t"""
    H, alphas = _check_economy(H, alphas, beta, d)
    m, n = H.shape
    b, c = _vector(b, "b", n), _vector(c, "c", n)
    H_dagger = np.linalg.pinv(H)
    loading = b.copy()
    for k in range(d):
        e_k = np.eye(m)[k]
        weight = alphas[k] * beta / (1 - alphas[k] * beta)
        loading += weight * H_dagger @ np.outer(e_k, e_k) @ H @ c
    return loading


def ge_pe_transform(
    H: np.ndarray,
    b: Sequence[float],
    c: Sequence[float],
    g: Sequence[float],
    beta: float,
    alphas: Sequence[float],
    d: int,
) -> np.ndarray:
    """Shock loadings H_tilde of a general equilibrium economy equivalent to the PE one with H

    H_tilde = H (I - X g'), with X the partial equilibrium action loading.

    Raises
    ------
    RankDeficientH
        If H does not have full row rank
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    g = _vector(g, "g", H.shape[1])
    loading = pe_action_loading(H, b, c, beta, alphas, d)
    return H @ (np.eye(H.shape[1]) - np.outer(loading, g))


@dataclass(frozen=True, eq=False)
class GeEquilibrium:
    """Linear equilibrium y_t = H_hat'f_t of the general equilibrium economy

    Parameters
    ----------
    H_hat
        m x n equilibrium loadings of the observables on the shocks
    action_loading
        X with x_t = X'y_t
    model
        Agents' pseudo-true m.i.o. d-state model of y
    """

    H_hat: np.ndarray
    action_loading: np.ndarray
    model: MioDStateModel
    iterations: int
    residual: float
    method: str

    def to_dict(self) -> dict:
        return {
            "H_hat": self.H_hat.tolist(),
            "action_loading": self.action_loading.tolist(),
            "model": self.model.to_dict(),
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
        }


def _shock_process(loadings: np.ndarray, alphas: np.ndarray, sigmas: np.ndarray):
    return LatentVarProcess(np.diag(alphas), loadings, np.diag(sigmas**2))


def _discounted_forecast(loadings, alphas, sigmas, beta, d):
    """sum_s beta^s E_t[y_{t+s}] as a matrix on y_t under the m.i.o. d-state model"""
    acv = autocov_from_var(_shock_process(loadings, alphas, sigmas), check=False)
    reduced, lifting = rank_reduce(acv)
    model = solve_mio_d_state(reduced, d)
    return lifting @ model.discounted_forecast(beta) @ np.linalg.pinv(lifting), model


def ge_equilibrium(
    H_tilde: np.ndarray,
    g: Sequence[float],
    b: Sequence[float],
    c: Sequence[float],
    beta: float,
    alphas: Sequence[float],
    sigmas: Sequence[float],
    d: int,
    tol: float = TOLERANCE,
) -> GeEquilibrium:
    """Solve the general equilibrium economy with shock loadings H_tilde

    Iterates on the equilibrium loadings H_hat: given y = H_hat'f, agents'
    d-state model gives the action loading X and y = (I - g X')^{-1} H_tilde'f.
    """
    H_tilde, alphas = _check_economy(H_tilde, alphas, beta, d)
    m, n = H_tilde.shape
    g, b, c = _vector(g, "g", n), _vector(b, "b", n), _vector(c, "c", n)
    sigmas = _vector(sigmas, "sigmas", m)
    if np.any(sigmas <= 0):
        raise ConfigError(f"sigmas must be positive, got {sigmas.tolist()}")

    def action_loading(H_hat):
        forecast, model = _discounted_forecast(H_hat, alphas, sigmas, beta, d)
        return b + forecast.T @ c, model

    def mapping(flat):
        loading, _ = action_loading(flat.reshape(m, n))
        feedback = np.eye(n) - np.outer(g, loading)
        return np.linalg.solve(feedback, H_tilde.T).T.ravel()

    result = solve_fixed_point(mapping, H_tilde.ravel(), tol=tol, name="GE equilibrium")
    H_hat = result.x.reshape(m, n)
    loading, model = action_loading(H_hat)
    return GeEquilibrium(
        H_hat=H_hat,
        action_loading=loading,
        model=model,
        iterations=result.iterations,
        residual=result.residual,
        method=result.method,
    )


def economy_law(
    H: np.ndarray, action_loading: np.ndarray, alphas: Sequence[float], sigmas: Sequence[float]
) -> LinearLaw:
    """Law of the shocks reporting the observables and the action"""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m, n = H.shape
    alphas = _vector(alphas, "alphas", m)
    sigmas = _vector(sigmas, "sigmas", m)
    observation = np.vstack([H.T, action_loading @ H.T])
    return LinearLaw(
        transition=np.diag(alphas),
        impact=np.eye(m),
        observation=observation,
        shock_cov=np.diag(sigmas**2),
        variables=tuple(f"y{i + 1}" for i in range(n)) + ("action",),
        shocks=tuple(f"f{k + 1}" for k in range(m)),
    )
