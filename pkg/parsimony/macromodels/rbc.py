#! /usr/bin/env python
"""Real business cycle model with households forecasting through simple models"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from ..exceptions import ConfigError, InvalidD, NumericalFailure
from ..pseudotrue import recover_markov
from ..ssm import MioDStateModel, OneStatePseudoTrue
from .fixedpoint import (
    STARTS,
    TOLERANCE,
    OneStateBeliefs,
    law_autocov,
    solve_fixed_point_multistart,
    verify_memoryless,
)
from .laws import LinearLaw

logger = logging.getLogger(__name__)

# Order of xi = T f, with f = (capital, tfp)
VARIABLES = (
    "capital",
    "tfp",
    "output",
    "hours",
    "wage",
    "rental_rate",
    "consumption",
    "investment",
)


@dataclass(frozen=True)
class RbcCalibration:
    """Quarterly RBC parameters

    Parameters
    ----------
    beta
        Discount factor
    sigma
        Elasticity of intertemporal substitution
    varphi
        Inverse Frisch elasticity
    delta
        Depreciation rate
    alpha
        Capital share
    rho
        Persistence of TFP
    sigma_eps
        Standard deviation of TFP innovations
    """

    beta: float
    sigma: float
    varphi: float
    delta: float
    alpha: float
    rho: float
    sigma_eps: float = 0.01

    def __post_init__(self):
        for name in ("beta", "delta", "alpha"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value!r}")
        for name in ("sigma", "varphi", "sigma_eps"):
            value = getattr(self, name)
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if not -1 < self.rho < 1:
            raise ConfigError(f"rho must lie in (-1, 1), got {self.rho!r}")

    @classmethod
    def from_dict(cls, section: dict) -> "RbcCalibration":
        try:
            return cls(**section)
        except TypeError as error:
            raise ConfigError(f"Invalid rbc section: {error}") from error


@dataclass(frozen=True)
class RbcSteadyState:
    rental_rate: float
    capital_output: float
    investment_output: float
    consumption_output: float
    consumption_capital: float
    chi: float
    zeta: float

    @classmethod
    def from_calibration(cls, cal: RbcCalibration) -> "RbcSteadyState":
        r = 1 / cal.beta - 1 + cal.delta
        investment_output = cal.delta * cal.alpha / r
        consumption_capital = r / cal.alpha - cal.delta
        chi = (1 - cal.beta) / (
            (1 - cal.alpha) * r / (cal.alpha * cal.sigma * cal.varphi) + consumption_capital
        )
        zeta = (1 - cal.alpha) * (1 + cal.varphi) * r / (cal.alpha * cal.varphi)
        return cls(
            rental_rate=r,
            capital_output=cal.alpha / r,
            investment_output=investment_output,
            consumption_output=1 - investment_output,
            consumption_capital=consumption_capital,
            chi=chi,
            zeta=zeta,
        )


def static_block(cal: RbcCalibration, steady: RbcSteadyState) -> Dict[str, np.ndarray]:
    """Within-period variables as linear functions of (capital, tfp, consumption)"""
    alpha, r = cal.alpha, steady.rental_rate
    hours = np.array([alpha, 1.0, -1 / cal.sigma]) / (cal.varphi + alpha)
    wage = np.array([alpha, 1.0, 0.0]) - alpha * hours
    output = np.array([alpha, 1.0, 0.0]) + (1 - alpha) * hours
    rental_rate = np.array([-(1 - alpha) * r, r, 0.0]) + (1 - alpha) * r * hours
    investment = (output - steady.consumption_output * np.array([0.0, 0.0, 1.0])) / (
        steady.investment_output
    )
    return {
        "output": output,
        "hours": hours,
        "wage": wage,
        "rental_rate": rental_rate,
        "investment": investment,
    }


def _state_map(static: Dict[str, np.ndarray], consumption: np.ndarray) -> np.ndarray:
    rows = {
        "capital": np.array([1.0, 0.0]),
        "tfp": np.array([0.0, 1.0]),
        "consumption": consumption,
    }
    for name, vector in static.items():
        rows[name] = vector[:2] + vector[2] * consumption
    return np.array([rows[name] for name in VARIABLES])


def _transition(T: np.ndarray, cal: RbcCalibration) -> np.ndarray:
    investment = T[VARIABLES.index("investment")]
    return np.array(
        [
            [1 - cal.delta + cal.delta * investment[0], cal.delta * investment[1]],
            [0.0, cal.rho],
        ]
    )


def _shock_cov(cal: RbcCalibration) -> np.ndarray:
    return np.diag([0.0, cal.sigma_eps**2])


def _consumption_from_gammas(gammas, static, cal, steady) -> np.ndarray:
    """Solve c = (chi/beta + gamma_k) k + chi r + chi zeta w + gamma_a a for c(k, a)"""
    chi, zeta = steady.chi, steady.zeta
    coefficients = (
        np.array([chi / cal.beta + gammas[0], gammas[1], 0.0])
        + chi * static["rental_rate"]
        + chi * zeta * static["wage"]
    )
    return coefficients[:2] / (1 - coefficients[2])


def _gammas_from_consumption(consumption, static, cal, steady) -> np.ndarray:
    T = _state_map(static, consumption)
    chi, zeta = steady.chi, steady.zeta
    current = (
        np.array([chi / cal.beta, 0.0])
        + chi * T[VARIABLES.index("rental_rate")]
        + chi * zeta * T[VARIABLES.index("wage")]
    )
    return consumption - current


def _rational_consumption(static, cal: RbcCalibration) -> np.ndarray:
    """Saddle-path consumption rule from the aggregate Euler equation"""
    i_k, i_a, i_c = static["investment"]
    r_k, r_a, r_c = static["rental_rate"]
    beta, sigma, delta, rho = cal.beta, cal.sigma, cal.delta, cal.rho
    a0, a1 = 1 - delta + delta * i_k, delta * i_c
    u, v = 1 - sigma * beta * r_c, -sigma * beta * r_k
    roots = np.roots([u * a1, u * a0 + v * a1 - 1, v * a0])
    stable = [c.real for c in roots if abs(c.imag) < 1e-12 and abs(a0 + a1 * c.real) < 1]
    if len(stable) != 1:
        raise NumericalFailure(f"Expected one stable capital root, found {len(stable)}")
    c_k = stable[0]
    m = c_k - sigma * beta * (r_k + r_c * c_k)
    c_a = (m * delta * i_a - rho * sigma * beta * r_a) / (
        1 - m * delta * i_c - rho + rho * sigma * beta * r_c
    )
    return np.array([c_k, c_a])


@dataclass(frozen=True, eq=False)
class RbcEquilibrium:
    """Linear RBC equilibrium f_t = transition f_{t-1} + e_t, xi_t = T_map f_t

    Parameters
    ----------
    mode
        'cree' or 're'
    d
        Number of subjective states (cree only)
    gamma_k, gamma_a
        Weights of capital and TFP in the expectation term of consumption
    psi_k, psi_a
        Investment loadings on capital and TFP
    T_map
        8 x 2 map from (capital, tfp) to every variable
    pseudo_true
        Households' model of f, None under rational expectations
    z_weights
        Weights of the state estimate on (capital, tfp), unit 1-norm,
        signed so that consumption loads positively on it
    consumption_rule
        Coefficients of consumption on capital, rental rate, wage and state
    """

    mode: str
    d: Optional[int]
    gamma_k: float
    gamma_a: float
    psi_k: float
    psi_a: float
    T_map: np.ndarray
    transition: np.ndarray
    pseudo_true: Optional[Union[OneStatePseudoTrue, MioDStateModel]]
    z_weights: Optional[np.ndarray]
    consumption_rule: Dict[str, float]
    iterations: int = 0
    residual: float = 0.0
    method: str = "closed-form"
    alternatives: int = 0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "d": self.d,
            "gamma_k": self.gamma_k,
            "gamma_a": self.gamma_a,
            "psi_k": self.psi_k,
            "psi_a": self.psi_a,
            "T_map": {name: row.tolist() for name, row in zip(VARIABLES, self.T_map)},
            "transition": self.transition.tolist(),
            "pseudo_true": self.pseudo_true.to_dict() if self.pseudo_true is not None else None,
            "z_weights": self.z_weights.tolist() if self.z_weights is not None else None,
            "consumption_rule": self.consumption_rule,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "distinct_fixed_points": self.alternatives + 1,
        }


class _Households:
    """Households' model of f = (capital, tfp) for a candidate consumption rule"""

    def __init__(self, cal: RbcCalibration, d: int):
        self.cal = cal
        self.d = d
        self.one_state = OneStateBeliefs("RBC equilibrium")

    def __call__(self, transition: np.ndarray):
        acv = law_autocov(transition, _shock_cov(self.cal))
        if self.d >= 2:
            return recover_markov(acv), acv
        return self.one_state(acv), acv


def solve_rbc(
    cal: RbcCalibration,
    mode: str = "cree",
    d: int = 1,
    tol: float = TOLERANCE,
    starts: int = STARTS,
    seed: int = 0,
) -> RbcEquilibrium:
    """Constrained rational expectations or rational expectations equilibrium

    Under 'cree' the fixed point is over (gamma_k, gamma_a), started at the
    values implied by the rational-expectations consumption rule. With d = 1
    the eta = 0 conjecture is verified; with d >= 2 the households recover the
    true two-state law.

    Raises
    ------
    NoConvergence
        When no fixed point is found
    VerificationFailed
        When eta = 0 fails at the fixed point
    """
    if mode in ("rational", "re"):
        mode = "re"
    elif mode not in ("cree", "cree_d1"):
        raise ConfigError(f"Unknown RBC mode {mode!r}")
    if mode == "cree" and not 1 <= d <= 2:
        raise InvalidD(f"d must be 1 or 2 for the RBC model, got {d!r}")
    steady = RbcSteadyState.from_calibration(cal)
    static = static_block(cal, steady)
    chi, zeta = steady.chi, steady.zeta
    rational = _rational_consumption(static, cal)
    start = _gammas_from_consumption(rational, static, cal, steady)

    if mode == "re":
        T = _state_map(static, rational)
        investment = T[VARIABLES.index("investment")]
        logger.info("RBC rational expectations equilibrium solved")
        return RbcEquilibrium(
            mode="re",
            d=None,
            gamma_k=float(start[0]),
            gamma_a=float(start[1]),
            psi_k=float(investment[0]),
            psi_a=float(investment[1]),
            T_map=T,
            transition=_transition(T, cal),
            pseudo_true=None,
            z_weights=None,
            consumption_rule={"capital": float(rational[0]), "tfp": float(rational[1])},
        )

    households = _Households(cal, d)
    weights = np.zeros(len(VARIABLES))
    weights[VARIABLES.index("rental_rate")] = chi - cal.beta * cal.sigma
    weights[VARIABLES.index("wage")] = chi * zeta

    def mapping(gammas):
        T = _state_map(static, _consumption_from_gammas(gammas, static, cal, steady))
        model, _ = households(_transition(T, cal))
        return (weights @ T) @ model.discounted_forecast(cal.beta)

    result = solve_fixed_point_multistart(
        mapping, start, tol=tol, starts=starts, seed=seed, name="RBC equilibrium"
    )
    gammas = result.x
    T = _state_map(static, _consumption_from_gammas(gammas, static, cal, steady))
    transition = _transition(T, cal)
    model, acv = households(transition)
    investment = T[VARIABLES.index("investment")]
    rule = {"capital": chi / cal.beta, "rental_rate": chi, "wage": chi * zeta}
    z_weights = None
    if d == 1:
        verify_memoryless(acv, model, name="RBC equilibrium")
        discount = model.a * cal.beta / (1 - model.a * cal.beta)
        loading = (1 - model.eta) * discount * (weights @ T @ model.q)
        scale = np.sign(loading) * np.abs(model.p).sum()
        z_weights = model.p / scale
        rule["state"] = float(loading * scale)
    return RbcEquilibrium(
        mode="cree",
        d=d,
        gamma_k=float(gammas[0]),
        gamma_a=float(gammas[1]),
        psi_k=float(investment[0]),
        psi_a=float(investment[1]),
        T_map=T,
        transition=transition,
        pseudo_true=model,
        z_weights=z_weights,
        consumption_rule=rule,
        iterations=result.iterations,
        residual=result.residual,
        method=result.method,
        alternatives=len(result.alternatives),
    )


def rbc_law(eq: RbcEquilibrium, cal: RbcCalibration) -> LinearLaw:
    """Law of motion of (capital, tfp) reporting every variable and the state estimate"""
    observation, variables = eq.T_map, VARIABLES
    if eq.z_weights is not None:
        observation = np.vstack([observation, eq.z_weights])
        variables = VARIABLES + ("state",)
    return LinearLaw(
        transition=eq.transition,
        impact=np.array([[0.0], [1.0]]),
        observation=observation,
        shock_cov=np.array([[cal.sigma_eps**2]]),
        variables=variables,
        shocks=("tfp",),
    )
