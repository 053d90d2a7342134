#! /usr/bin/env python
"""Equilibrium fixed points: damped iteration with a derivative-free fallback"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
import scipy.optimize

from ..exceptions import (
    NoConvergence,
    NotExponentiallyErgodic,
    NumericalError,
    UnstableLaw,
    VerificationFailed,
)
from ..linalg import spectral_radius
from ..procspec import AutocovSeq, LatentVarProcess, autocov_from_var
from ..pseudotrue import solve_one_state_exp_erg, solve_one_state_general
from ..settings import config
from ..ssm import OneStatePseudoTrue

logger = logging.getLogger(__name__)

DAMPING = config["macromodels"]["damping"]
TOLERANCE = config["macromodels"]["tolerance"]
MAX_ITER = config["macromodels"]["max-iter"]
ETA_TOLERANCE = config["macromodels"]["eta-tolerance"]
STARTS = config["macromodels"]["starts"]

# Residual accepted from the derivative-free fallback
FALLBACK_TOLERANCE = 1e-8
# Window over which a stalled residual counts as oscillation
STALL_WINDOW = 50


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    x: np.ndarray
    residual: float
    iterations: int
    method: str
    residuals: List[float] = field(default_factory=list)
    alternatives: Tuple[np.ndarray, ...] = ()


def solve_affine(residual: Callable[[np.ndarray], np.ndarray], size: int) -> np.ndarray:
    """Root of an affine residual r(x) = A x - b, probing it at 0 and the unit vectors"""
    offset = np.asarray(residual(np.zeros(size)), dtype=float)
    columns = [np.asarray(residual(e), dtype=float) - offset for e in np.eye(size)]
    return np.linalg.solve(np.column_stack(columns), -offset)


def _stalled(residuals: List[float]) -> bool:
    if len(residuals) < 2 * STALL_WINDOW:
        return False
    return min(residuals[-STALL_WINDOW:]) >= 0.999 * min(residuals[:-STALL_WINDOW])


def _iterate(
    mapping: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    damping: float,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, List[float], bool]:
    x = np.asarray(x0, dtype=float)
    best, residuals = x, []
    for _ in range(max_iter):
        try:
            image = mapping(x)
        except NumericalError as error:
            logger.debug(f"Damped iteration left the admissible region: {error}")
            break
        residual = float(np.linalg.norm(image - x))
        if not residuals or residual < min(residuals):
            best = x
        residuals.append(residual)
        if residual <= tol:
            return x, residuals, True
        if _stalled(residuals):
            logger.warning(
                f"Damped iteration stalls at residual {min(residuals):.3e}; "
                f"switching to Nelder-Mead"
            )
            break
        x = (1 - damping) * x + damping * image
    return best, residuals, False


def _minimize(
    mapping: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, tol: float
) -> Tuple[np.ndarray, float]:
    def distance(x):
        try:
            return float(np.sum((mapping(x) - x) ** 2))
        except NumericalError:
            return 1e12

    result = scipy.optimize.minimize(
        distance,
        x0,
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol**2, "maxiter": 20000, "maxfev": 40000},
    )
    return result.x, float(np.sqrt(result.fun))


def solve_fixed_point(
    mapping: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    damping: float = DAMPING,
    tol: float = TOLERANCE,
    max_iter: int = MAX_ITER,
    name: str = "equilibrium",
) -> FixedPointResult:
    """Fixed point of mapping, iterated with damping and polished by Nelder-Mead

    Parameters
    ----------
    mapping
        Map whose fixed point is sought. It may raise a NumericalError outside
        the admissible region.
    x0
        Starting point
    damping
        Weight of the new image in each update
    tol
        Target norm of mapping(x) - x
    max_iter
        Iteration budget of the damped phase
    name
        Used in log messages

    Raises
    ------
    NoConvergence
        With the residual path, when neither phase reaches the tolerance
    """
    x, residuals, converged = _iterate(mapping, x0, damping, tol, max_iter)
    if converged:
        logger.info(f"{name}: fixed point after {len(residuals)} iterations")
        return FixedPointResult(x, residuals[-1], len(residuals), "damped", residuals)

    x, residual = _minimize(mapping, x, tol)
    residuals.append(residual)
    if residual <= max(tol, FALLBACK_TOLERANCE):
        logger.info(f"{name}: fixed point by Nelder-Mead, residual {residual:.3e}")
        return FixedPointResult(x, residual, len(residuals), "nelder-mead", residuals)
    raise NoConvergence(
        f"{name}: no fixed point found (best residual {min(residuals):.3e})", residuals
    )


def solve_fixed_point_multistart(
    mapping: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    starts: int = STARTS,
    seed: int = 0,
    name: str = "equilibrium",
    **kwargs,
) -> FixedPointResult:
    """solve_fixed_point from x0 and from starts - 1 perturbed points

    Distinct fixed points are kept as alternatives and logged.
    """
    primary = solve_fixed_point(mapping, x0, name=name, **kwargs)
    if starts <= 1:
        return primary
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.abs(primary.x).max()))
    alternatives = []
    for _ in range(starts - 1):
        start = primary.x + 0.5 * scale * rng.standard_normal(primary.x.shape)
        try:
            other = solve_fixed_point(mapping, start, name=name, **kwargs)
        except NoConvergence:
            continue
        known = [primary.x] + alternatives
        if all(np.linalg.norm(other.x - y) > 1e-6 * scale for y in known):
            alternatives.append(other.x)
    if alternatives:
        logger.warning(f"{name}: {len(alternatives) + 1} distinct fixed points found")
    return FixedPointResult(
        primary.x,
        primary.residual,
        primary.iterations,
        primary.method,
        primary.residuals,
        tuple(alternatives),
    )


def verify_memoryless(
    acv: AutocovSeq,
    solution: OneStatePseudoTrue,
    tol: float = ETA_TOLERANCE,
    name: str = "equilibrium",
) -> OneStatePseudoTrue:
    """Check with the general solver that the pseudo-true model has eta = 0

    Raises
    ------
    VerificationFailed
        If the general solver finds eta above tol or a different persistence
    """
    general = solve_one_state_general(acv)
    if general.eta > tol:
        raise VerificationFailed(
            f"{name}: pseudo-true model has eta = {general.eta:.3e} > {tol:.1e} at the fixed point"
        )
    if abs(abs(general.a) - abs(solution.a)) > max(1e-6, 10 * tol):
        raise VerificationFailed(
            f"{name}: general solver finds a = {general.a:.8f}, iteration used {solution.a:.8f}"
        )
    logger.info(f"{name}: eta = 0 verified (a = {general.a:.6f})")
    return general


def law_autocov(transition: np.ndarray, shock_cov: np.ndarray) -> AutocovSeq:
    """Autocovariances of f_t = transition f_{t-1} + e_t, Var(e_t) = shock_cov

    Raises
    ------
    UnstableLaw
        When a candidate equilibrium is explosive
    """
    radius = spectral_radius(transition)
    if radius >= 1:
        raise UnstableLaw(f"Candidate law of motion is explosive (spectral radius {radius:.6f})")
    process = LatentVarProcess(transition, np.eye(len(transition)), shock_cov)
    return autocov_from_var(process)


class OneStateBeliefs:
    """Pseudo-true one-state model of a candidate law

    Uses the closed form and falls back to the general solver, warning once,
    when the candidate process is not exponentially ergodic.
    """

    def __init__(self, name: str = "equilibrium"):
        self.name = name
        self.warned = False

    def __call__(self, acv: AutocovSeq) -> OneStatePseudoTrue:
        try:
            return solve_one_state_exp_erg(acv)
        except NotExponentiallyErgodic as error:
            if not self.warned:
                logger.warning(f"{self.name}: {error}; falling back to the general solver")
                self.warned = True
            return solve_one_state_general(acv)
