#! /usr/bin/env python
"""Linear laws of motion, their impulse responses and simulated paths"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import UnstableLaw
from ..linalg import as_matrix, spectral_radius, sym
from ..procspec import lyapunov_solve
from ..settings import config

logger = logging.getLogger(__name__)

IRF_HORIZON = config["macromodels"]["irf-horizon"]
IRF_SCALE = config["macromodels"]["irf-scale"]


@dataclass(frozen=True, eq=False)
class LinearLaw:
    """State law x_t = transition x_{t-1} + impact e_t with observables observation x_t

    Parameters
    ----------
    transition
        m x m state transition
    impact
        m x k loading of the innovations
    observation
        v x m map from the state to the reported variables
    shock_cov
        k x k innovation covariance
    variables
        Names of the v reported variables
    shocks
        Names of the k innovations
    """

    transition: np.ndarray
    impact: np.ndarray
    observation: np.ndarray
    shock_cov: np.ndarray
    variables: Tuple[str, ...]
    shocks: Tuple[str, ...]

    def __post_init__(self):
        transition = as_matrix(self.transition, "transition")
        impact = as_matrix(self.impact, "impact")
        observation = as_matrix(self.observation, "observation")
        shock_cov = as_matrix(self.shock_cov, "shock_cov")
        m = transition.shape[0]
        if transition.shape != (m, m):
            raise ValueError(f"transition must be square, got shape {transition.shape}")
        if impact.shape[0] != m:
            raise ValueError(f"impact must have {m} rows, got shape {impact.shape}")
        k = impact.shape[1]
        if shock_cov.shape != (k, k):
            raise ValueError(f"shock_cov must be {k}x{k}, got shape {shock_cov.shape}")
        if observation.shape[1] != m:
            raise ValueError(f"observation must have {m} columns, got shape {observation.shape}")
        if len(self.variables) != observation.shape[0]:
            raise ValueError(
                f"{len(self.variables)} variable names for {observation.shape[0]} observables"
            )
        if len(self.shocks) != k:
            raise ValueError(f"{len(self.shocks)} shock names for {k} innovations")
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "impact", impact)
        object.__setattr__(self, "observation", observation)
        object.__setattr__(self, "shock_cov", sym(shock_cov))
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "shocks", tuple(self.shocks))

    def require_stable(self) -> None:
        radius = spectral_radius(self.transition)
        if radius >= 1:
            raise UnstableLaw(f"Law of motion is not stable: spectral radius {radius!r}")

    @cached_property
    def state_variance(self) -> np.ndarray:
        self.require_stable()
        return lyapunov_solve(self.transition, self.impact @ self.shock_cov @ self.impact.T)

    def covariance(self, lag: int = 0) -> pd.DataFrame:
        """E[v_t v_{t-lag}'] of the reported variables"""
        values = (
            self.observation
            @ np.linalg.matrix_power(self.transition, lag)
            @ self.state_variance
            @ self.observation.T
        )
        return pd.DataFrame(values, index=self.variables, columns=self.variables)

    def variance(self) -> pd.Series:
        return pd.Series(np.diag(self.covariance().values), index=self.variables)

    def correlation(self, first: str, second: str) -> float:
        cov = self.covariance()
        scale = np.sqrt(cov.loc[first, first] * cov.loc[second, second])
        return float(cov.loc[first, second] / scale)

    def shock_vector(self, shock: Union[str, Sequence[float]]) -> np.ndarray:
        """Unit innovation along a named shock, or the given innovation vector"""
        if isinstance(shock, str):
            if shock not in self.shocks:
                raise ValueError(f"Unknown shock {shock!r}; expected one of {self.shocks}")
            return np.eye(len(self.shocks))[self.shocks.index(shock)]
        vector = np.atleast_1d(np.asarray(shock, dtype=float))
        if vector.shape != (len(self.shocks),):
            raise ValueError(f"Shock must have {len(self.shocks)} entries, got {vector.shape}")
        return vector


def impulse_response(
    law: LinearLaw,
    shock: Union[str, Sequence[float]],
    horizon: int = IRF_HORIZON,
    scale: float = 1.0,
) -> pd.DataFrame:
    """Responses of the reported variables to a one-time innovation

    Row 0 is the impact period.

    Parameters
    ----------
    law
        Stable law of motion
    shock
        Shock name (unit innovation) or innovation vector
    horizon
        Number of periods reported
    scale
        Size of the innovation
    """
    law.require_stable()
    state = law.impact @ (scale * law.shock_vector(shock))
    rows = []
    for _ in range(horizon):
        rows.append(law.observation @ state)
        state = law.transition @ state
    frame = pd.DataFrame(np.array(rows).reshape(horizon, -1), columns=law.variables)
    frame.index.name = "period"
    return frame


def simulate(
    law: LinearLaw, periods: int, seed: int, initial: Optional[np.ndarray] = None
) -> pd.DataFrame:
    """Simulated path of the reported variables

    The first state is drawn from the stationary distribution unless given.
    The same seed always returns the same path.
    """
    law.require_stable()
    rng = np.random.default_rng(seed)
    m, k = law.impact.shape
    if initial is None:
        state = rng.multivariate_normal(np.zeros(m), law.state_variance, method="svd")
    else:
        state = np.asarray(initial, dtype=float)
    innovations = rng.multivariate_normal(np.zeros(k), law.shock_cov, size=periods, method="svd")
    pushes = innovations @ law.impact.T
    states = np.empty((periods, m))
    for t in range(periods):
        if t > 0:
            state = law.transition @ state + pushes[t]
        states[t] = state
    logger.debug(f"Simulated {periods} periods with seed {seed}")
    frame = pd.DataFrame(states @ law.observation.T, columns=law.variables)
    frame.index.name = "period"
    return frame


def to_long_format(frame: pd.DataFrame, scale: float = 100.0) -> pd.DataFrame:
    """period, variable, value table with values multiplied by scale"""
    long = frame.reset_index().melt(id_vars="period", var_name="variable", value_name="value")
    long["value"] = long["value"] * scale
    return long[["period", "variable", "value"]]
