#! /usr/bin/env python
"""New-Keynesian model with agents forecasting through a pseudo-true one-state model

The observable is f = (output gap, inflation, interest rate) and the exogenous
shocks are s = (interest rate, natural rate, cost push).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from ..exceptions import ConfigError, SingularOmegaCov, VerificationFailed
from ..linalg import as_matrix, condition_number, spectral_radius, sym
from ..procspec import (
    CONDITION_CAP,
    AutocovSeq,
    LatentVarProcess,
    autocov_from_var,
    rank_reduce,
)
from ..settings import config
from ..ssm import OneStatePseudoTrue
from .fixedpoint import (
    STARTS,
    TOLERANCE,
    OneStateBeliefs,
    solve_affine,
    solve_fixed_point_multistart,
    verify_memoryless,
)
from .laws import LinearLaw

logger = logging.getLogger(__name__)

SHOCK_NAMES = ("interest_rate", "natural_rate", "cost_push")
OBSERVABLE_NAMES = ("output_gap", "inflation", "interest_rate")
CONDITIONINGS = ("pure", "cholesky")

SHOCK_AUTOCORRELATION_CAP = config["macromodels"]["shock-autocorrelation-cap"]


@dataclass(frozen=True, eq=False)
class NkCalibration:
    """Structural parameters and the first two shock autocovariances

    Parameters
    ----------
    beta
        Discount factor in (0, 1)
    sigma
        Intertemporal elasticity of substitution
    delta
        Calvo probability of not resetting the price, in (0, 1)
    kappa
        Slope of the Phillips curve, positive
    shock_gamma0, shock_gamma1
        Lag-zero and lag-one autocovariances of s = (i, r^n, mu)
    """

    beta: float
    sigma: float
    delta: float
    kappa: float
    shock_gamma0: np.ndarray
    shock_gamma1: np.ndarray

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta!r}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.kappa <= 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa!r}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma!r}")
        gamma0 = as_matrix(self.shock_gamma0, "shock_gamma0")
        gamma1 = as_matrix(self.shock_gamma1, "shock_gamma1")
        if gamma0.shape != (3, 3) or gamma1.shape != (3, 3):
            raise ConfigError("Shock autocovariances must be 3x3")
        scale = max(np.abs(gamma0).max(), np.finfo(float).tiny)
        if np.abs(gamma0 - gamma0.T).max() > 1e-10 * scale:
            raise ConfigError("shock_gamma0 must be symmetric")
        if np.linalg.eigvalsh(sym(gamma0)).min() < -1e-10 * scale:
            raise ConfigError("shock_gamma0 must be positive semi-definite")
        object.__setattr__(self, "shock_gamma0", sym(gamma0))
        object.__setattr__(self, "shock_gamma1", gamma1)

    @classmethod
    def from_dict(cls, section: dict) -> "NkCalibration":
        try:
            return cls(**section)
        except TypeError as error:
            raise ConfigError(f"Invalid nk section: {error}") from error


@dataclass(frozen=True, eq=False)
class ShockProcess:
    """VAR(1) in the non-degenerate shock coordinates, s = lifting @ s_reduced"""

    transition: np.ndarray
    covariance: np.ndarray
    lifting: np.ndarray
    names: Tuple[str, ...]

    @property
    def rank(self) -> int:
        return self.transition.shape[0]

    @property
    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.lifting)

    @property
    def full_covariance(self) -> np.ndarray:
        """Innovation covariance of s"""
        return self.lifting @ self.covariance @ self.lifting.T


@dataclass(frozen=True, eq=False)
class NkEquilibrium:
    """Linear equilibrium (output gap, inflation) = loadings @ s

    Parameters
    ----------
    mode
        'cree' (pseudo-true one-state expectations) or 're'
    gamma_x, gamma_pi
        Weights of the state estimate in the two equilibrium equations
    loadings
        2 x 3 map from (i, r^n, mu) to (output gap, inflation), supported on
        the span of the shocks
    solution
        Pseudo-true one-state model of f, None under rational expectations
    gamma0_f, gamma1_f
        Autocovariances of f implied by the equilibrium
    shocks
        Fitted shock process
    p_s
        Loading of the state estimate on s
    """

    mode: str
    gamma_x: float
    gamma_pi: float
    loadings: np.ndarray
    solution: Optional[OneStatePseudoTrue]
    gamma0_f: np.ndarray
    gamma1_f: np.ndarray
    shocks: ShockProcess
    p_s: Optional[np.ndarray]
    iterations: int = 0
    residual: float = 0.0
    method: str = "closed-form"
    alternatives: int = 0

    @property
    def reduced_loadings(self) -> np.ndarray:
        return self.loadings @ self.shocks.lifting

    @property
    def observation(self) -> np.ndarray:
        """Map from (i, r^n, mu) to f = (output gap, inflation, interest rate)"""
        return np.vstack([self.loadings, self.shocks.lifting[0] @ self.shocks.pinv])

    def to_dict(self) -> dict:
        cree = self.solution is not None
        return {
            "mode": self.mode,
            "gamma_x": self.gamma_x if cree else None,
            "gamma_pi": self.gamma_pi if cree else None,
            "loadings": {
                name: dict(zip(SHOCK_NAMES, row.tolist()))
                for name, row in zip(OBSERVABLE_NAMES, self.observation)
            },
            "pseudo_true": self.solution.to_dict() if cree else None,
            "gamma0_f": self.gamma0_f.tolist(),
            "gamma1_f": self.gamma1_f.tolist(),
            "shock_transition": self.shocks.transition.tolist(),
            "shock_covariance": self.shocks.covariance.tolist(),
            "shock_lifting": self.shocks.lifting.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "distinct_fixed_points": self.alternatives + 1,
        }


def _shock_name(lifting: np.ndarray, j: int) -> str:
    unit = np.eye(lifting.shape[1])[j]
    for i, row in enumerate(lifting):
        if np.allclose(row, unit):
            return SHOCK_NAMES[i]
    return f"shock_{j + 1}"


def _admissible_gamma1(acv: AutocovSeq, cap: float) -> np.ndarray:
    """Gamma_1 with the singular values of Gamma_0^{-1/2} Gamma_1 Gamma_0^{-1/2} clipped at cap

    A pair (Gamma_0, Gamma_1) belongs to a stationary process only if those
    singular values are at most one. Pairs that pass are returned unchanged.
    """
    root, inv_root = acv.roots
    u, values, vt = np.linalg.svd(inv_root @ acv.gamma1 @ inv_root)
    if values[0] < 1:
        return acv.gamma1
    gamma1 = root @ (u * np.minimum(values, cap)) @ vt @ root
    change = float(np.abs(gamma1 - acv.gamma1).max())
    logger.warning(
        f"Shock autocovariances are not those of a stationary process (whitened lag-one "
        f"singular value {values[0]:.5f}); lag-one autocovariance clipped at {cap}, "
        f"largest entry change {change:.3e}"
    )
    return gamma1


def fit_shock_process(cal: NkCalibration, cap: float = SHOCK_AUTOCORRELATION_CAP) -> ShockProcess:
    """Complete (Gamma_0^s, Gamma_1^s) into a VAR(1) of the non-degenerate shocks

    Gamma_0^s is kept exactly. When no stationary process has both moments,
    Gamma_1^s is first moved to the nearest admissible value whose whitened
    singular values do not exceed cap.

    Raises
    ------
    ConfigError
        If cap is outside (0, 1) or the moments imply an explosive VAR
    """
    if not 0 < cap < 1:
        raise ConfigError(f"shock-autocorrelation-cap must lie in (0, 1), got {cap!r}")
    raw = AutocovSeq(np.stack([cal.shock_gamma0, cal.shock_gamma1]))
    reduced, lifting = rank_reduce(raw)
    gamma0, gamma1 = reduced.gamma0, _admissible_gamma1(reduced, cap)
    transition = np.linalg.solve(gamma0.T, gamma1.T).T
    radius = spectral_radius(transition)
    if radius >= 1:
        raise ConfigError(f"Shock autocovariances imply an explosive VAR (radius {radius!r})")
    covariance = sym(gamma0 - transition @ gamma0 @ transition.T)
    names = tuple(_shock_name(lifting, j) for j in range(lifting.shape[1]))
    return ShockProcess(transition, covariance, lifting, names)


def _f_process(shocks: ShockProcess, reduced_loadings: np.ndarray) -> LatentVarProcess:
    observation = np.vstack([reduced_loadings, shocks.lifting[0]])
    return LatentVarProcess(shocks.transition, observation.T, shocks.covariance)


def _pseudo_true_of_f(shocks: ShockProcess, reduced_loadings: np.ndarray, beliefs):
    """Pseudo-true one-state model of f for given loadings, lifted back to all of f"""
    acv = autocov_from_var(_f_process(shocks, reduced_loadings), check=False)
    reduced, lifting = rank_reduce(acv)
    solution = beliefs(reduced)
    lifted = OneStatePseudoTrue(
        a=solution.a,
        eta=solution.eta,
        p=np.linalg.pinv(lifting).T @ solution.p,
        q=lifting @ solution.q,
        lambda_max=solution.lambda_max,
        ambiguous=solution.ambiguous,
    )
    return lifted, acv, reduced, solution


def _gammas(solution: OneStatePseudoTrue, cal: NkCalibration) -> Tuple[float, float]:
    a, q = solution.a, solution.q
    return a * (q[0] - cal.sigma * q[1]), a * cal.beta * q[1]


def nk_closed_form_loadings(
    gamma_x: float, gamma_pi: float, p: np.ndarray, cal: NkCalibration
) -> np.ndarray:
    """Loadings of (output gap, inflation) on (i, r^n, mu) given the state-estimate weights

    Solves x = sigma (r^n - i) + gamma_x p'f and pi = kappa x + mu + gamma_pi p'f.
    """
    px, ppi, pi = p
    sigma, kappa = cal.sigma, cal.kappa
    det = 1 - px * gamma_x - ppi * (gamma_pi + kappa * gamma_x)
    if abs(det) < 1e-12:
        raise VerificationFailed("Equilibrium equations are singular at these weights")
    damped = sigma * (1 - gamma_pi * ppi)
    output = [gamma_x * pi - damped, damped, gamma_x * ppi]
    inflation = [
        (gamma_pi + kappa * gamma_x) * pi - sigma * (kappa + gamma_pi * px),
        sigma * (kappa + gamma_pi * px),
        1 - gamma_x * px,
    ]
    return np.array([output, inflation]) / det


def _rational_loadings(shocks: ShockProcess, cal: NkCalibration) -> np.ndarray:
    r = shocks.rank
    identity = np.eye(r)

    def discounted(b):
        return b * shocks.transition @ np.linalg.inv(identity - b * shocks.transition)

    G, G_delta = discounted(cal.beta), discounted(cal.beta * cal.delta)
    e_i, e_r, e_mu = shocks.lifting
    beta, sigma, delta, kappa = cal.beta, cal.sigma, cal.delta, cal.kappa

    def residual(z):
        lx, lpi = z[:r], z[r:]
        demand = -sigma * (e_i - e_r) + G.T @ (
            (1 - beta) / beta * lx - sigma * (e_i - e_r) - sigma / beta * lpi
        )
        supply = kappa * lx + e_mu + G_delta.T @ (kappa * lx + (1 - delta) / delta * lpi + e_mu)
        return np.concatenate([lx - demand, lpi - supply])

    return solve_affine(residual, 2 * r).reshape(2, r)


def _update(reduced_loadings: np.ndarray, shocks: ShockProcess, cal: NkCalibration, beliefs):
    solution = _pseudo_true_of_f(shocks, reduced_loadings, beliefs)[0]
    gamma_x, gamma_pi = _gammas(solution, cal)
    observation = np.vstack([reduced_loadings, shocks.lifting[0]])
    p_s = observation.T @ solution.p
    e_i, e_r, e_mu = shocks.lifting
    lx = cal.sigma * (e_r - e_i) + gamma_x * p_s
    lpi = cal.kappa * lx + e_mu + gamma_pi * p_s
    return np.vstack([lx, lpi])


def solve_nk(
    cal: NkCalibration,
    mode: str = "cree",
    tol: float = TOLERANCE,
    starts: int = STARTS,
    seed: int = 0,
    cap: float = SHOCK_AUTOCORRELATION_CAP,
) -> NkEquilibrium:
    """Constrained rational expectations (or rational expectations) equilibrium

    The constrained equilibrium is a fixed point in the loadings of output gap
    and inflation on the shocks, started from the rational-expectations
    loadings. It is checked against the closed-form loadings implied by the
    final pseudo-true model, and eta = 0 is verified with the general solver.
    cap bounds the whitened lag-one shock autocorrelation, see fit_shock_process.

    Raises
    ------
    NoConvergence
        When no fixed point is found
    VerificationFailed
        When the fixed point misses the closed form or eta = 0
    """
    if mode in ("re", "rational"):
        mode = "re"
    elif mode not in ("cree", "cree_d1"):
        raise ConfigError(f"Unknown NK mode {mode!r}")
    shocks = fit_shock_process(cal, cap)
    rational = _rational_loadings(shocks, cal)
    pinv = shocks.pinv

    if mode == "re":
        process = _f_process(shocks, rational)
        logger.info("NK rational expectations equilibrium solved")
        return NkEquilibrium(
            mode="re",
            gamma_x=float("nan"),
            gamma_pi=float("nan"),
            loadings=rational @ pinv,
            solution=None,
            gamma0_f=process.gamma0,
            gamma1_f=process.gamma(1),
            shocks=shocks,
            p_s=None,
        )

    beliefs = OneStateBeliefs("NK equilibrium")
    r = shocks.rank

    def mapping(z):
        return _update(z.reshape(2, r), shocks, cal, beliefs).ravel()

    result = solve_fixed_point_multistart(
        mapping, rational.ravel(), tol=tol, starts=starts, seed=seed, name="NK equilibrium"
    )
    reduced_loadings = result.x.reshape(2, r)
    solution, acv, reduced_acv, reduced_solution = _pseudo_true_of_f(
        shocks, reduced_loadings, beliefs
    )
    if solution.q[0] < 0:
        solution = OneStatePseudoTrue(
            a=solution.a,
            eta=solution.eta,
            p=-solution.p,
            q=-solution.q,
            lambda_max=solution.lambda_max,
            ambiguous=solution.ambiguous,
        )
    gamma_x, gamma_pi = _gammas(solution, cal)
    loadings = reduced_loadings @ pinv

    closed_form = nk_closed_form_loadings(gamma_x, gamma_pi, solution.p, cal) @ (
        shocks.lifting @ pinv
    )
    gap = float(np.abs(closed_form - loadings).max())
    if gap > 1e-7 * max(1.0, float(np.abs(loadings).max())):
        raise VerificationFailed(f"NK loadings miss their closed form by {gap:.3e}")
    verify_memoryless(reduced_acv, reduced_solution, name="NK equilibrium")

    observation = np.vstack([reduced_loadings, shocks.lifting[0]])
    return NkEquilibrium(
        mode="cree",
        gamma_x=float(gamma_x),
        gamma_pi=float(gamma_pi),
        loadings=loadings,
        solution=solution,
        gamma0_f=acv.gamma0,
        gamma1_f=acv.gamma1,
        shocks=shocks,
        p_s=pinv.T @ (observation.T @ solution.p),
        iterations=result.iterations,
        residual=result.residual,
        method=result.method,
        alternatives=len(result.alternatives),
    )


def nk_residuals(eq: NkEquilibrium, cal: NkCalibration, s: np.ndarray) -> np.ndarray:
    """Residuals of the two equilibrium equations at shock vectors s (rows)

    sigma r^n - (x + sigma i - gamma_x p'f) and mu - (pi - kappa x - gamma_pi p'f)
    """
    if eq.solution is None:
        raise ValueError("Residuals are defined for the constrained equilibrium")
    s = np.atleast_2d(s)
    x, pi = (s @ eq.loadings.T).T
    i, r, mu = s.T
    z = eq.solution.p @ np.vstack([x, pi, i])
    return np.column_stack(
        [
            cal.sigma * r - (x + cal.sigma * i - eq.gamma_x * z),
            mu - (pi - cal.kappa * x - eq.gamma_pi * z),
        ]
    )


def nk_law(eq: NkEquilibrium) -> LinearLaw:
    """Law of motion of the shocks with (output gap, inflation, shocks[, state]) reported"""
    shocks = eq.shocks
    rows = [eq.reduced_loadings, shocks.lifting]
    variables = ["output_gap", "inflation", "interest_rate", "natural_rate", "cost_push"]
    if eq.p_s is not None:
        rows.append((eq.p_s @ shocks.lifting)[None, :])
        variables.append("state")
    return LinearLaw(
        transition=shocks.transition,
        impact=np.eye(shocks.rank),
        observation=np.vstack(rows),
        shock_cov=shocks.covariance,
        variables=tuple(variables),
        shocks=shocks.names,
    )


@dataclass(frozen=True, eq=False)
class ForwardGuidanceResult:
    """Equilibrium responses when the rate path i_{t+1..t+T} is announced

    nu_x and nu_pi hold the coefficients of output gap and inflation on
    (i_t, r^n_t, mu_t, i_{t+1}, ..., i_{t+T}).
    """

    T: int
    nu_x: np.ndarray
    nu_pi: np.ndarray
    psi_x: np.ndarray
    psi_pi: np.ndarray

    def response(self, current: Sequence[float], path: Sequence[float] = ()) -> Tuple[float, float]:
        z = np.concatenate([np.asarray(current, dtype=float), np.asarray(path, dtype=float)])
        if z.shape != self.nu_x.shape:
            raise ValueError(f"Expected 3 current shocks and {self.T} announced rates")
        return float(self.nu_x @ z), float(self.nu_pi @ z)


def _conditioning_covariance(a, p, q, gamma0, T):
    g0p = gamma0 @ p
    lagged = p @ gamma0[:, 2]
    cov = np.zeros((3 + T, 3 + T))
    cov[:3, :3] = gamma0
    for tau in range(1, T + 1):
        cov[:3, 2 + tau] = cov[2 + tau, :3] = a**tau * q[2] * g0p
        for other in range(1, T + 1):
            if other == tau:
                cov[2 + tau, 2 + other] = gamma0[2, 2]
            else:
                cov[2 + tau, 2 + other] = a ** abs(tau - other) * q[2] * lagged
    return cov


def _discounted_cross_covariance(a, p, q, gamma0, T, b):
    """sum_{s>=1} b^s Cov(f_{t+s}, omega_T)"""
    g0p = gamma0 @ p
    lagged = p @ gamma0[:, 2]
    k = a * b / (1 - a * b)
    sums = np.zeros((3, 3 + T))
    sums[:, :3] = k * np.outer(q, g0p)
    for tau in range(1, T + 1):
        before = sum(b**s * a ** (tau - s) for s in range(1, tau)) * q[2] * g0p
        sums[:, 2 + tau] = before + b**tau * gamma0[:, 2] + b**tau * k * lagged * q
    return sums


def nk_forward_guidance(eq: NkEquilibrium, cal: NkCalibration, T: int) -> ForwardGuidanceResult:
    """Coefficients of output gap and inflation when T future rates are announced

    Raises
    ------
    SingularOmegaCov
        If the covariance of (f_t, i_{t+1..t+T}) is numerically singular
    """
    if eq.solution is None:
        raise ValueError("Forward guidance needs the constrained equilibrium")
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T!r}")
    sol = eq.solution
    a, p, q, gamma0 = sol.a, sol.p, sol.q, eq.gamma0_f
    beta, sigma, delta, kappa = cal.beta, cal.sigma, cal.delta, cal.kappa
    gx, gpi = eq.gamma_x, eq.gamma_pi

    cov = _conditioning_covariance(a, p, q, gamma0, T)
    cond = condition_number(cov)
    if not cond < CONDITION_CAP:
        raise SingularOmegaCov(cond)

    v_x = np.array([1 - beta * gx * p[0], -(sigma + beta * gx * p[1]), -beta * gx * p[2]]) / beta
    v_pi = np.array([-delta * gpi * p[0], 1 - delta * gpi * p[1], -delta * gpi * p[2]]) / delta
    psi_x = np.linalg.solve(cov, _discounted_cross_covariance(a, p, q, gamma0, T, beta).T @ v_x)
    psi_pi = np.linalg.solve(
        cov, _discounted_cross_covariance(a, p, q, gamma0, T, beta * delta).T @ v_pi
    )

    system = np.array([[1 - psi_x[0], -psi_x[1]], [-(kappa + psi_pi[0]), 1 - psi_pi[1]]])
    right = np.zeros((2, 3 + T))
    right[0, :3] = [-sigma + psi_x[2], sigma, 0.0]
    right[1, :3] = [psi_pi[2], 0.0, 1.0]
    right[0, 3:] = psi_x[3:]
    right[1, 3:] = psi_pi[3:]
    nu = np.linalg.solve(system, right)
    return ForwardGuidanceResult(T=T, nu_x=nu[0], nu_pi=nu[1], psi_x=psi_x, psi_pi=psi_pi)


def expected_rate_path(eq: NkEquilibrium, current: Sequence[float], T: int) -> np.ndarray:
    """Agents' own forecast of i_{t+1..t+T} given current shocks (i, r^n, mu)

    Announcing this path leaves output gap and inflation at their baseline values.
    """
    if eq.solution is None:
        raise ValueError("The expected rate path needs the constrained equilibrium")
    sol = eq.solution
    state = sol.p @ (eq.observation @ np.asarray(current, dtype=float))
    return sol.a ** np.arange(1, T + 1) * sol.q[2] * state


def rate_cut_impulse(eq: NkEquilibrium, conditioning: str = "pure") -> np.ndarray:
    """Current shocks (i, r^n, mu) of a one-unit cut in the interest rate

    'pure' moves the rate alone. 'cholesky' adds the responses of r^n and mu
    predicted by the rate innovation.
    """
    if conditioning == "pure":
        return np.array([-1.0, 0.0, 0.0])
    if conditioning == "cholesky":
        cov = eq.shocks.full_covariance
        if cov[0, 0] <= 0:
            raise ValueError("The interest rate has no innovation to condition on")
        return -cov[:, 0] / cov[0, 0]
    raise ConfigError(f"Unknown conditioning {conditioning!r}; expected one of {CONDITIONINGS}")


def nk_forward_guidance_sweep(
    eq: NkEquilibrium,
    cal: NkCalibration,
    t_max: int,
    conditioning: str = "pure",
    progress: bool = False,
) -> pd.DataFrame:
    """Responses to a one-unit rate cut held for T = 0..t_max further periods"""
    current = rate_cut_impulse(eq, conditioning)
    rows = []
    horizons = tqdm(
        range(t_max + 1), total=t_max + 1, desc="Forward guidance", disable=not progress
    )
    for T in horizons:
        result = nk_forward_guidance(eq, cal, T)
        output, inflation = result.response(current, -np.ones(T))
        rows.append({"T": T, "output_response": output, "inflation_response": inflation})
    return pd.DataFrame(rows, columns=["T", "output_response", "inflation_response"])
