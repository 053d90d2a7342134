#! /usr/bin/env python
"""Pseudo-true low-dimensional models of a true process"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Tuple, Union

import numpy as np
import pandas as pd
import scipy.optimize
from tqdm.auto import tqdm

from .exceptions import (
    AsymmetricGamma1,
    InvalidD,
    InvalidSolution,
    NotExponentiallyErgodic,
    NumericalFailure,
)
from .linalg import psd_sqrt, sign_normalize, sorted_eigh, sym
from .procspec import (
    AutocorrSeq,
    AutocovSeq,
    autocorr,
    check_exponential_ergodicity,
    decompose_persistence,
)
from .settings import config
from .ssm import (
    MioComponent,
    MioDStateModel,
    OneStatePseudoTrue,
    StateSpaceModel,
    subjective_moments,
)

logger = logging.getLogger(__name__)

GRID_A = config["pseudotrue"]["grid-a"]
GRID_ETA = config["pseudotrue"]["grid-eta"]
TOP_K = config["pseudotrue"]["top-k"]
POLISH_TOLERANCE = config["pseudotrue"]["polish-tolerance"]
TIE_TOLERANCE = config["pseudotrue"]["tie-tolerance"]
GAMMA1_SYMMETRY_TOLERANCE = config["pseudotrue"]["gamma1-symmetry-tolerance"]

# Largest |a| a solution may report
PERSISTENCE_CAP = 1 - 1e-8


def _coefficients(a, eta):
    """Scalar weights of I and of sum_tau a^tau eta^(tau-1) C_tau in Omega"""
    a = np.asarray(a, dtype=float)
    eta = np.asarray(eta, dtype=float)
    denominator = 1 - a**2 * eta**2
    safe = np.where(denominator > 0, denominator, 1.0)
    alpha = np.where(denominator > 0, -(a**2) * (1 - eta) ** 2 / safe, 0.0)
    beta = np.where(denominator > 0, 2 * (1 - eta) * (1 - a**2 * eta) / safe, 0.0)
    return alpha, beta


def omega_matrix(acs: AutocorrSeq, a: float, eta: float) -> np.ndarray:
    """Omega(a, eta), whose largest eigenvalue the one-state model maximizes

    Parameters
    ----------
    acs
        Autocorrelations of the truth
    a
        Candidate persistence in [-1, 1]
    eta
        Candidate noise weight in [0, 1]; Omega vanishes at eta = 1
    """
    if not (-1 <= a <= 1 and 0 <= eta <= 1):
        raise ValueError(f"(a, eta) = ({a!r}, {eta!r}) is outside [-1, 1] x [0, 1]")
    if eta == 1:
        return np.zeros((acs.n, acs.n))
    alpha, beta = _coefficients(a, eta)
    lag_sum = a * acs.geometric_sum(a * eta)
    return sym(alpha * np.eye(acs.n) + beta * lag_sum)


def lambda_max(acs: AutocorrSeq, a: float, eta: float) -> float:
    return float(np.linalg.eigvalsh(omega_matrix(acs, a, eta))[-1])


def _lambda_and_gradient(acs: AutocorrSeq, x: np.ndarray) -> Tuple[float, np.ndarray]:
    a, eta = x
    D = 1 - a**2 * eta**2
    alpha, beta = _coefficients(a, eta)
    S = acs.geometric_sum(a * eta)
    dS = acs.geometric_sum(a * eta, derivative=True)
    values, vectors = np.linalg.eigh(sym(a * S))
    mu, u = values[-1], vectors[:, -1]

    d_alpha = np.array(
        [-2 * a * (1 - eta) ** 2 / D**2, 2 * a**2 * (1 - eta) * (1 - a**2 * eta) / D**2]
    )
    numerator = 2 * (1 - eta) * (1 - a**2 * eta)
    d_beta_eta = (-2 * (1 + a**2 - 2 * a**2 * eta) * D + numerator * 2 * a**2 * eta) / D**2
    d_beta = np.array([-4 * a * eta * (1 - eta) ** 2 / D**2, d_beta_eta])
    d_C = np.array([u @ (S + a * eta * dS) @ u, u @ (a**2 * dS) @ u])
    return float(alpha + beta * mu), d_alpha + mu * d_beta + beta * d_C


@dataclass(frozen=True, eq=False)
class OmegaObjective:
    """lambda_max(Omega) sampled on a grid of (a, eta)"""

    grid_a: np.ndarray
    grid_eta: np.ndarray
    values: np.ndarray
    argmax: Tuple[float, float]

    def top_points(self, k: int) -> List[Tuple[float, float]]:
        order = np.argsort(-self.values, axis=None, kind="stable")[:k]
        rows, cols = np.unravel_index(order, self.values.shape)
        return [(float(self.grid_a[i]), float(self.grid_eta[j])) for i, j in zip(rows, cols)]


def scan_omega(
    acs: AutocorrSeq, grid_a: np.ndarray, grid_eta: np.ndarray, progress: bool = False
) -> OmegaObjective:
    """Evaluate lambda_max(Omega(a, eta)) on the product grid, one a-row at a time"""
    grid_a = np.asarray(grid_a, dtype=float)
    grid_eta = np.asarray(grid_eta, dtype=float)
    values = np.empty((len(grid_a), len(grid_eta)))
    identity = np.eye(acs.n)
    rows = tqdm(
        enumerate(grid_a), total=len(grid_a), desc="Scanning Omega", disable=not progress
    )
    for i, a in rows:
        alpha, beta = _coefficients(a, grid_eta)
        lag_sum = a * acs.geometric_sum(a * grid_eta)
        omegas = alpha[:, None, None] * identity + beta[:, None, None] * lag_sum
        row = np.linalg.eigvalsh(sym(omegas))[:, -1]
        values[i] = np.where(grid_eta < 1, row, 0.0)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    return OmegaObjective(grid_a, grid_eta, values, (float(grid_a[i]), float(grid_eta[j])))


class _Candidate(NamedTuple):
    value: float
    a: float
    eta: float


def _polish(acs: AutocorrSeq, start: Tuple[float, float], tol: float) -> _Candidate:
    """Derivative-free polish, then a gradient step where lambda_max is smooth"""
    result = scipy.optimize.minimize(
        lambda x: -lambda_max(acs, *x),
        np.asarray(start),
        method="Nelder-Mead",
        bounds=[(-1.0, 1.0), (0.0, 1.0)],
        options={"xatol": tol, "fatol": 1e-15, "maxiter": 4000},
    )
    best = _Candidate(-float(result.fun), float(result.x[0]), float(result.x[1]))
    if abs(best.a) >= PERSISTENCE_CAP or best.eta >= PERSISTENCE_CAP:
        return best

    def negative(x):
        value, gradient = _lambda_and_gradient(acs, x)
        return -value, -gradient

    refined = scipy.optimize.minimize(
        negative,
        np.array([best.a, best.eta]),
        jac=True,
        method="L-BFGS-B",
        bounds=[(-PERSISTENCE_CAP, PERSISTENCE_CAP), (0.0, PERSISTENCE_CAP)],
        options={"gtol": 1e-13, "ftol": 1e-16, "maxiter": 200},
    )
    value = lambda_max(acs, *refined.x)
    if value >= best.value:
        return _Candidate(value, float(refined.x[0]), float(refined.x[1]))
    return best


def _top_eigenvector(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest eigenvalue (not magnitude) with the module's tie-break"""
    values, vectors = np.linalg.eigh(sym(matrix))
    tied = np.flatnonzero(values >= values[-1] - 1e-12 * max(1.0, abs(values[-1])))
    if len(tied) > 1:
        candidates = [sign_normalize(vectors[:, i]) for i in tied]
        return float(values[-1]), min(candidates, key=lambda v: tuple(np.round(v, 12)))
    return float(values[-1]), sign_normalize(vectors[:, -1])


def _one_state_solution(
    acv: AutocovSeq, acs: AutocorrSeq, a: float, eta: float, ambiguous: bool = False
) -> OneStatePseudoTrue:
    root, inv_root = acv.roots
    value, u = _top_eigenvector(omega_matrix(acs, a, eta))
    return OneStatePseudoTrue(
        a=a, eta=eta, p=inv_root @ u, q=root @ u, lambda_max=value, ambiguous=ambiguous
    )


def solve_one_state_general(
    acv: AutocovSeq,
    grid_a: int = GRID_A,
    grid_eta: int = GRID_ETA,
    top_k: int = TOP_K,
    tol: float = POLISH_TOLERANCE,
    progress: bool = False,
) -> OneStatePseudoTrue:
    """Pseudo-true one-state model of any stationary truth

    Maximizes lambda_max(Omega(a, eta)) over [-1, 1] x [0, 1]: grid scan, then
    local polish of the top grid points, plus the exact optimum on the eta = 0
    edge. Optima within the tie tolerance resolve to the smallest eta, then the
    smallest |a|.

    Parameters
    ----------
    acv
        Autocovariances of the truth
    grid_a, grid_eta
        Grid resolutions
    top_k
        Number of grid points polished
    tol
        Box tolerance of the polish
    progress
        Show a progress bar during the scan
    """
    acs = autocorr(acv)
    objective = scan_omega(
        acs, np.linspace(-1, 1, grid_a), np.linspace(0, 1, grid_eta), progress=progress
    )
    logger.debug(f"Grid maximum at (a, eta) = {objective.argmax}")

    candidates = [_polish(acs, start, tol) for start in objective.top_points(top_k)]
    values, _ = sorted_eigh(acs.c1)
    candidates.append(_Candidate(float(values[0] ** 2), float(values[0]), 0.0))

    best = max(c.value for c in candidates)
    tied = [c for c in candidates if c.value >= best - TIE_TOLERANCE]
    chosen = min(tied, key=lambda c: (round(c.eta, 12), round(abs(c.a), 12), -c.a))
    a = float(np.clip(chosen.a, -PERSISTENCE_CAP, PERSISTENCE_CAP))
    if a != chosen.a and chosen.eta < 1:
        logger.warning(f"Persistence {chosen.a!r} clipped to the stationary region")
    logger.info(
        f"One-state pseudo-true model: a = {a:.6f}, eta = {chosen.eta:.6f}, "
        f"lambda_max = {chosen.value:.6f}"
    )
    return _one_state_solution(acv, acs, a, chosen.eta)


def solve_one_state_exp_erg(acv: AutocovSeq) -> OneStatePseudoTrue:
    """Closed-form pseudo-true one-state model of an exponentially ergodic truth

    Raises
    ------
    NotExponentiallyErgodic
        When the truth fails the test; use solve_one_state_general instead
    """
    acs = autocorr(acv)
    report = check_exponential_ergodicity(acs)
    if not report.is_exp_ergodic:
        raise NotExponentiallyErgodic(
            f"Truth is not exponentially ergodic (first violation at lag "
            f"{report.first_violation_lag})"
        )
    values, vectors = sorted_eigh(acs.c1)
    ambiguous = (
        len(values) > 1 and np.isclose(values[1], -values[0], atol=1e-12) and values[0] != 0
    )
    if ambiguous:
        logger.warning(
            f"Both +/-{abs(values[0]):.6f} are top eigenvalues; keeping the positive one"
        )
    root, inv_root = acv.roots
    a, u = float(values[0]), vectors[:, 0]
    return OneStatePseudoTrue(
        a=a, eta=0.0, p=inv_root @ u, q=root @ u, lambda_max=a**2, ambiguous=bool(ambiguous)
    )


def solve_mio_d_state(acv: AutocovSeq, d: int) -> MioDStateModel:
    """Pseudo-true Markovian-in-observables d-state model, for symmetric Gamma_1"""
    if not 1 <= d <= acv.n:
        raise InvalidD(f"d must lie between 1 and {acv.n}, got {d!r}")
    scale = max(1.0, np.abs(acv.gamma0).max())
    asymmetry = float(np.abs(acv.gamma1 - acv.gamma1.T).max())
    if asymmetry > GAMMA1_SYMMETRY_TOLERANCE * scale:
        raise AsymmetricGamma1(asymmetry, GAMMA1_SYMMETRY_TOLERANCE * scale)
    root, inv_root = acv.roots
    values, vectors = sorted_eigh(autocorr(acv).c1)
    return MioDStateModel(
        components=tuple(
            MioComponent(a=float(values[i]), p=inv_root @ vectors[:, i], q=root @ vectors[:, i])
            for i in range(d)
        )
    )


def recover_markov(acv: AutocovSeq) -> MioDStateModel:
    """n-state model of observables that are themselves a VAR(1)

    The pseudo-true n-state model is then the truth, with forecasts
    (Gamma_1 Gamma_0^{-1})^s y_t written through its eigen-decomposition.
    """
    transition = np.linalg.solve(acv.gamma0.T, acv.gamma1.T).T
    if acv.L >= 2:
        mismatch = np.abs(acv.lag(2) - transition @ acv.gamma1).max()
        if mismatch > 1e-8 * max(1.0, np.abs(acv.gamma0).max()):
            raise ValueError(f"Observables are not a VAR(1) (lag-two mismatch {mismatch:.3e})")
    values, right = np.linalg.eig(transition)
    if np.abs(values.imag).max() > 1e-12:
        raise NumericalFailure("Observable VAR(1) has complex roots")
    values, right = values.real, right.real
    left = np.linalg.inv(right).T
    order = sorted(range(len(values)), key=lambda i: (-round(abs(values[i]), 12), values[i] < 0))
    components = []
    for i in order:
        p, q = left[:, i], right[:, i]
        scale = np.sqrt(p @ acv.gamma0 @ p)
        p, q = p / scale, q * scale
        if not np.array_equal(sign_normalize(p), p):
            p, q = -p, -q
        components.append(MioComponent(a=float(values[i]), p=p, q=q))
    return MioDStateModel(components=tuple(components))


def to_state_space(
    sol: Union[OneStatePseudoTrue, MioDStateModel], gamma0: np.ndarray
) -> StateSpaceModel:
    """Explicit (A, B, Q, R) representation of a pseudo-true model

    Raises
    ------
    InvalidSolution
        If the implied observation noise covariance is not positive semi-definite
    """
    gamma0 = np.atleast_2d(np.asarray(gamma0, dtype=float))
    root, inv_root = psd_sqrt(gamma0)
    scale = max(1.0, np.abs(gamma0).max())
    if isinstance(sol, MioDStateModel):
        A = np.diag(sol.a)
        Q = np.eye(sol.d)
        B = (sol.Q * np.sqrt(1 - sol.a**2)).T
        R = gamma0 - sol.Q @ sol.Q.T
    else:
        u = root @ sol.p
        lam = sol.lambda_max
        A = np.array([[sol.a]])
        Q = np.array([[1 - sol.a**2 * sol.eta]])
        B = np.sqrt(max((1 - sol.eta) * (1 - lam), 0.0)) * (u @ root)[None, :]
        R = root @ (np.eye(len(u)) - (1 - sol.eta + sol.eta * lam) * np.outer(u, u)) @ root
    R = sym(R)
    smallest = np.linalg.eigvalsh(R).min()
    if smallest < -1e-10 * scale:
        raise InvalidSolution(f"Observation noise covariance has eigenvalue {smallest:.3e}")
    try:
        return StateSpaceModel(A=A, B=B, Q=Q, R=R)
    except ValueError as error:
        raise InvalidSolution(str(error)) from error


def reaction_report(
    sol: Union[OneStatePseudoTrue, MioDStateModel], acv: AutocovSeq, lags: int
) -> pd.DataFrame:
    """True against subjective autocorrelations of each persistence component"""
    decomposition = decompose_persistence(acv)
    subjective = subjective_moments(to_state_space(sol, acv.gamma0), lags)
    rows = []
    for i, component in enumerate(decomposition.components, start=1):
        p = component.p
        subjective_variance = p @ subjective.gamma0 @ p
        for lag in range(1, lags + 1):
            rows.append(
                {
                    "component": i,
                    "lag": lag,
                    "true_autocorr": float(p @ acv.lag(lag) @ p),
                    "subjective_autocorr": float(p @ subjective.lag(lag) @ p / subjective_variance),
                }
            )
    return pd.DataFrame(rows, columns=["component", "lag", "true_autocorr", "subjective_autocorr"])
