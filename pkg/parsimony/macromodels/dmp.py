#! /usr/bin/env python
"""Search and matching labor market with firms and workers forecasting through simple models"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..exceptions import ConfigError
from ..ssm import OneStatePseudoTrue
from .fixedpoint import (
    STARTS,
    TOLERANCE,
    OneStateBeliefs,
    law_autocov,
    solve_affine,
    solve_fixed_point_multistart,
    verify_memoryless,
)
from .laws import LinearLaw

logger = logging.getLogger(__name__)

# f = (unemployment, productivity, separation)
STATES = ("unemployment", "productivity", "separation")
SHOCKS = ("productivity", "separation")
VARIABLES = (
    "productivity",
    "separation",
    "tightness",
    "vacancies",
    "unemployment",
    "job_finding",
    "job_filling",
    "wage",
)


@dataclass(frozen=True)
class DmpCalibration:
    """Monthly DMP parameters

    Parameters
    ----------
    beta
        Discount factor
    s
        Mean separation rate
    p
        Steady-state job-finding rate
    alpha
        Elasticity of the matching function
    delta
        Workers' bargaining power
    rho_a, rho_s
        Persistence of productivity and separation shocks
    b
        Flow value of unemployment, below steady-state productivity of one
    corr_as
        Correlation of productivity and separation innovations
    sd_ratio
        Standard deviation of productivity innovations over that of separation ones
    """

    beta: float
    s: float
    p: float
    alpha: float
    delta: float
    rho_a: float
    rho_s: float
    b: float
    corr_as: float = -0.4
    sd_ratio: float = 10.0

    def __post_init__(self):
        for name in ("beta", "s", "p", "alpha", "delta"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value!r}")
        if self.s + self.p >= 1:
            raise ConfigError(f"s + p must be below one, got {self.s + self.p!r}")
        for name in ("rho_a", "rho_s"):
            value = getattr(self, name)
            if not -1 < value < 1:
                raise ConfigError(f"{name} must lie in (-1, 1), got {value!r}")
        if self.b >= 1:
            raise ConfigError(f"b must be below steady-state productivity 1, got {self.b!r}")
        if not -1 <= self.corr_as <= 1:
            raise ConfigError(f"corr_as must lie in [-1, 1], got {self.corr_as!r}")
        if self.sd_ratio <= 0:
            raise ConfigError(f"sd_ratio must be positive, got {self.sd_ratio!r}")

    @classmethod
    def from_dict(cls, section: dict) -> "DmpCalibration":
        try:
            return cls(**section)
        except TypeError as error:
            raise ConfigError(f"Invalid dmp section: {error}") from error

    @property
    def shock_cov(self) -> np.ndarray:
        """Innovation covariance with unit productivity standard deviation"""
        cross = self.corr_as / self.sd_ratio
        return np.array([[1.0, cross], [cross, 1 / self.sd_ratio**2]])


@dataclass(frozen=True)
class DmpSteadyState:
    """Steady state with productivity one, tightness normalized to one"""

    w: float
    J: float
    u: float
    p: float
    theta: float
    mu: float
    k: float
    chi: float
    zeta: float

    @classmethod
    def from_calibration(cls, cal: DmpCalibration) -> "DmpSteadyState":
        beta, s, p, delta, b = cal.beta, cal.s, cal.p, cal.delta, cal.b
        w = (delta * (1 - beta * (1 - s - p)) + (1 - delta) * (1 - beta * (1 - s)) * b) / (
            1 - beta * (1 - s - delta * p)
        )
        J = (1 - w) / (1 - beta * (1 - s))
        theta = 1.0
        # p = mu theta^(1 - alpha)
        mu = p / theta ** (1 - cal.alpha)
        return cls(
            w=w,
            J=J,
            u=s / (s + p),
            p=p,
            theta=theta,
            mu=mu,
            k=mu * theta ** (-cal.alpha) * beta * J,
            chi=beta * (1 - delta) * (w - b) / (1 - beta * (1 - s - p)),
            zeta=beta * s * (1 - w) / (1 - beta * (1 - s)),
        )

    def residuals(self, cal: DmpCalibration) -> Dict[str, float]:
        """Flow balance, free entry and Nash bargaining identities"""
        beta, s, p = cal.beta, cal.s, self.p
        return {
            "flows": s * (1 - self.u) / self.u - p,
            "free_entry": self.mu / (self.k * self.theta**cal.alpha) - 1 / (beta * self.J),
            "bargaining": (1 - cal.delta) * (self.w - cal.b) / (1 - beta * (1 - s - p))
            - cal.delta * (1 - self.w) / (1 - beta * (1 - s)),
        }

    def to_dict(self) -> dict:
        return {
            "w": self.w,
            "J": self.J,
            "u": self.u,
            "p": self.p,
            "theta": self.theta,
            "mu": self.mu,
            "k": self.k,
            "chi": self.chi,
            "zeta": self.zeta,
        }


@dataclass(frozen=True, eq=False)
class DmpEquilibrium:
    """Linear DMP equilibrium theta_t = psi_theta'f_t, w w_t = psi_w'f_t

    Parameters
    ----------
    mode
        'cree' or 're'
    psi_theta
        Tightness loadings on (unemployment, productivity, separation)
    psi_w
        Loadings of the wage, in level units, on the same states
    steady
        Steady state the model is linearized around
    transition
        Law of motion of f
    pseudo_true
        Agents' one-state model of f, None under rational expectations
    z_weights
        Weights of the state estimate on f, unit 1-norm, signed so that
        tightness loads positively on it
    state_loading
        Tightness loading on the normalized state estimate
    """

    mode: str
    psi_theta: np.ndarray
    psi_w: np.ndarray
    steady: DmpSteadyState
    transition: np.ndarray
    pseudo_true: Optional[OneStatePseudoTrue]
    z_weights: Optional[np.ndarray]
    state_loading: Optional[float]
    iterations: int = 0
    residual: float = 0.0
    method: str = "closed-form"
    alternatives: int = 0

    @property
    def psi(self) -> Dict[str, float]:
        names = ("u", "a", "s")
        values = {f"psi_theta{n}": float(v) for n, v in zip(names, self.psi_theta)}
        values.update({f"psi_w{n}": float(v) for n, v in zip(names, self.psi_w)})
        return values

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "psi": self.psi,
            "steady": self.steady.to_dict(),
            "transition": self.transition.tolist(),
            "pseudo_true": self.pseudo_true.to_dict() if self.pseudo_true is not None else None,
            "z_weights": self.z_weights.tolist() if self.z_weights is not None else None,
            "state_loading": self.state_loading,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "distinct_fixed_points": self.alternatives + 1,
        }


def dmp_transition(psi_theta: np.ndarray, cal: DmpCalibration) -> np.ndarray:
    """Law of (unemployment, productivity, separation) given the tightness rule"""
    transition = np.array(
        [
            [1 - cal.s - cal.p, 0.0, cal.p],
            [0.0, cal.rho_a, 0.0],
            [0.0, 0.0, cal.rho_s],
        ]
    )
    transition[0] -= (1 - cal.alpha) * cal.p * np.asarray(psi_theta, dtype=float)
    return transition


def _impact() -> np.ndarray:
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _f_shock_cov(cal: DmpCalibration) -> np.ndarray:
    impact = _impact()
    return impact @ cal.shock_cov @ impact.T


def _psi_residuals(
    x: np.ndarray, model: OneStatePseudoTrue, cal: DmpCalibration, steady: DmpSteadyState
) -> np.ndarray:
    """Tightness and wage equations under one-state forecasts, x = (psi_theta, psi_w)"""
    theta, wage = x[:3], x[3:]
    beta, s, p, alpha, delta, b = cal.beta, cal.s, cal.p, cal.alpha, cal.delta, cal.b
    chi, zeta, J = steady.chi, steady.zeta, steady.J
    a, weights, (q_u, q_a, q_s) = model.a, model.p, model.q
    pass_through = p * chi * (1 - alpha)
    firm = a / (1 - a * beta * (1 - s))
    worker_share = a * beta * delta * (1 - s) / (1 - a * beta * (1 - s))
    outside = a * beta * (1 - s - p) / (1 - a * beta * (1 - s - p))
    surplus = (1 - b - wage[1]) * q_a - wage[0] * q_u - (zeta + wage[2]) * q_s
    option = (
        (pass_through * theta[1] - (1 - delta) * wage[1]) * q_a
        + (pass_through * theta[0] - (1 - delta) * wage[0]) * q_u
        + (pass_through * theta[2] - (1 - delta) * wage[2] + s * chi) * q_s
    )
    memory = 1 - model.eta
    theta_image = memory * firm / (alpha * J) * surplus * weights
    wage_image = (
        pass_through * theta
        + np.array([0.0, delta * (1 - b), s * chi - delta * zeta])
        + memory * (worker_share * surplus + outside * option) * weights
    )
    return np.concatenate([theta - theta_image, wage - wage_image])


def _rational_residuals(x: np.ndarray, cal: DmpCalibration, steady: DmpSteadyState) -> np.ndarray:
    theta_a, theta_s, wage_a, wage_s = x
    beta, s, p, alpha, delta, b = cal.beta, cal.s, cal.p, cal.alpha, cal.delta, cal.b
    chi, zeta, J = steady.chi, steady.zeta, steady.J
    pass_through = p * chi * (1 - alpha)
    firm_a = cal.rho_a / (1 - beta * cal.rho_a * (1 - s))
    firm_s = cal.rho_s / (1 - beta * cal.rho_s * (1 - s))
    outside_a = beta * cal.rho_a * (1 - s - p) / (1 - beta * cal.rho_a * (1 - s - p))
    outside_s = beta * cal.rho_s * (1 - s - p) / (1 - beta * cal.rho_s * (1 - s - p))
    return np.array(
        [
            theta_a - firm_a * (1 - b - wage_a) / (alpha * J),
            theta_s + firm_s * (zeta + wage_s) / (alpha * J),
            wage_a
            - delta * (1 - b)
            - pass_through * theta_a
            - beta * delta * (1 - s) * firm_a * (1 - b - wage_a)
            - outside_a * (pass_through * theta_a - (1 - delta) * wage_a),
            wage_s
            - (s * chi - delta * zeta)
            - pass_through * theta_s
            + beta * delta * (1 - s) * firm_s * (zeta + wage_s)
            - outside_s * (pass_through * theta_s + s * chi - (1 - delta) * wage_s),
        ]
    )


def _rational_rules(
    cal: DmpCalibration, steady: DmpSteadyState
) -> Tuple[np.ndarray, np.ndarray]:
    theta_a, theta_s, wage_a, wage_s = solve_affine(
        lambda x: _rational_residuals(x, cal, steady), 4
    )
    return np.array([0.0, theta_a, theta_s]), np.array([0.0, wage_a, wage_s])


def _cree_rules(
    model: OneStatePseudoTrue, cal: DmpCalibration, steady: DmpSteadyState
) -> Tuple[np.ndarray, np.ndarray]:
    x = solve_affine(lambda x: _psi_residuals(x, model, cal, steady), 6)
    return x[:3], x[3:]


def dmp_residuals(eq: DmpEquilibrium, cal: DmpCalibration) -> np.ndarray:
    """The six tightness and wage equations evaluated at a constrained equilibrium"""
    if eq.pseudo_true is None:
        raise ValueError("Residuals are defined for constrained equilibria only")
    x = np.concatenate([eq.psi_theta, eq.psi_w])
    return _psi_residuals(x, eq.pseudo_true, cal, eq.steady)


def solve_dmp(
    cal: DmpCalibration,
    mode: str = "cree",
    tol: float = TOLERANCE,
    starts: int = STARTS,
    seed: int = 0,
) -> DmpEquilibrium:
    """Constrained rational expectations or rational expectations equilibrium

    Under 'cree' the fixed point is over the tightness loadings, started from
    the rational-expectations rule. Each candidate defines the law of f, its
    pseudo-true one-state model and, through six linear equations, new
    loadings. eta = 0 is verified at the fixed point.

    Raises
    ------
    NoConvergence
        When no fixed point is found
    VerificationFailed
        When eta = 0 fails at the fixed point
    """
    if mode in ("rational", "re"):
        mode = "re"
    elif mode in ("cree", "cree_d1"):
        mode = "cree"
    else:
        raise ConfigError(f"Unknown DMP mode {mode!r}")
    steady = DmpSteadyState.from_calibration(cal)
    theta_rule, wage_rule = _rational_rules(cal, steady)

    if mode == "re":
        logger.info("DMP rational expectations equilibrium solved")
        return DmpEquilibrium(
            mode="re",
            psi_theta=theta_rule,
            psi_w=wage_rule,
            steady=steady,
            transition=dmp_transition(theta_rule, cal),
            pseudo_true=None,
            z_weights=None,
            state_loading=None,
        )

    beliefs = OneStateBeliefs("DMP equilibrium")
    shock_cov = _f_shock_cov(cal)

    def mapping(psi_theta):
        acv = law_autocov(dmp_transition(psi_theta, cal), shock_cov)
        return _cree_rules(beliefs(acv), cal, steady)[0]

    result = solve_fixed_point_multistart(
        mapping, theta_rule, tol=tol, starts=starts, seed=seed, name="DMP equilibrium"
    )
    transition = dmp_transition(result.x, cal)
    acv = law_autocov(transition, shock_cov)
    model = beliefs(acv)
    verify_memoryless(acv, model, name="DMP equilibrium")
    theta_rule, wage_rule = _cree_rules(model, cal, steady)

    # theta = c p'f
    pivot = int(np.argmax(np.abs(model.p)))
    slope = theta_rule[pivot] / model.p[pivot]
    scale = np.sign(slope) * np.abs(model.p).sum()
    return DmpEquilibrium(
        mode="cree",
        psi_theta=theta_rule,
        psi_w=wage_rule,
        steady=steady,
        transition=dmp_transition(theta_rule, cal),
        pseudo_true=model,
        z_weights=model.p / scale,
        state_loading=float(slope * scale),
        iterations=result.iterations,
        residual=result.residual,
        method=result.method,
        alternatives=len(result.alternatives),
    )


def dmp_law(eq: DmpEquilibrium, cal: DmpCalibration) -> LinearLaw:
    """Law of f reporting the labor market observables and the state estimate"""
    e_u, e_a, e_s = np.eye(3)
    theta = eq.psi_theta
    rows = [
        e_a,
        e_s,
        theta,
        theta + e_u,
        e_u,
        (1 - cal.alpha) * theta,
        -cal.alpha * theta,
        eq.psi_w / eq.steady.w,
    ]
    variables = VARIABLES
    if eq.z_weights is not None:
        rows.append(eq.z_weights)
        variables = VARIABLES + ("state",)
    return LinearLaw(
        transition=eq.transition,
        impact=_impact(),
        observation=np.array(rows),
        shock_cov=cal.shock_cov,
        variables=variables,
        shocks=SHOCKS,
    )
