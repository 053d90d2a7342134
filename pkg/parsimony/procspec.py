#! /usr/bin/env python
"""True stochastic processes and their second moments"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .exceptions import (
    ConfigError,
    NonConvergent,
    NumericalFailure,
    RankDeficient,
    SingularGamma0,
)
from .linalg import (
    as_matrix,
    condition_number,
    psd_sqrt,
    sorted_eigh,
    spectral_radius,
    sym,
)
from .settings import config

logger = logging.getLogger(__name__)

MAX_LAGS = config["procspec"]["max-lags"]
TRUNCATION = config["procspec"]["truncation"]
TAIL_MARGIN = config["procspec"]["tail-margin"]
CONDITION_CAP = config["procspec"]["gamma0-condition-cap"]
RANK_TOLERANCE = config["procspec"]["rank-tolerance"]
SYMMETRY_TOLERANCE = config["procspec"]["symmetry-tolerance"]
ERGODICITY_TOLERANCE = config["procspec"]["ergodicity-tolerance"]
MODAL_CONDITION_CAP = config["procspec"]["modal-condition-cap"]


def lyapunov_solve(F: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """Stationary variance V of f_t = F f_{t-1} + e_t, i.e. V = F V F' + Sigma

    Parameters
    ----------
    F
        Convergent transition matrix
    Sigma
        Innovation covariance

    Raises
    ------
    NonConvergent
        If the spectral radius of F is not below one
    NumericalFailure
        If the returned solution misses the Lyapunov residual tolerance
    """
    F = as_matrix(F, "F")
    Sigma = as_matrix(Sigma, "Sigma")
    if F.shape[0] != F.shape[1] or Sigma.shape != F.shape:
        raise ValueError(f"Shapes do not match: F {F.shape}, Sigma {Sigma.shape}")
    radius = spectral_radius(F)
    if radius >= 1 - 1e-10:
        raise NonConvergent(f"Transition is not convergent: spectral radius {radius!r}")

    V = sym(scipy.linalg.solve_discrete_lyapunov(F, sym(Sigma)))
    residual = np.linalg.norm(V - F @ V @ F.T - Sigma)
    if residual > 1e-10 * max(np.linalg.norm(Sigma), np.finfo(float).tiny):
        raise NumericalFailure(f"Lyapunov residual {residual:.3e} is too large")
    return V


def truncation_lag(tail_rate: float, truncation: float = TRUNCATION) -> int:
    """Smallest lag L with tail_rate**L below the truncation level, capped"""
    if tail_rate <= 0:
        return 1
    return int(min(MAX_LAGS, max(1, math.ceil(math.log(truncation) / math.log(tail_rate)))))


@dataclass(frozen=True, eq=False)
class LatentVarProcess:
    """Latent VAR(1) f_t = F f_{t-1} + e_t observed through y_t = H' f_t

    Parameters
    ----------
    F
        m x m convergent transition
    H
        m x n loading of the observables
    Sigma
        m x m innovation covariance
    """

    F: np.ndarray
    H: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        F = as_matrix(self.F, "F")
        H = as_matrix(self.H, "H")
        Sigma = as_matrix(self.Sigma, "Sigma")
        m = F.shape[0]
        if F.shape != (m, m):
            raise ConfigError(f"F must be square, got shape {F.shape}")
        if H.shape[0] != m:
            raise ConfigError(f"H must have {m} rows, got shape {H.shape}")
        if Sigma.shape != (m, m):
            raise ConfigError(f"Sigma must be {m}x{m}, got shape {Sigma.shape}")
        scale = max(1.0, np.abs(Sigma).max())
        if np.abs(Sigma - Sigma.T).max() > 1e-12 * scale:
            raise ConfigError("Sigma must be symmetric")
        if np.linalg.eigvalsh(sym(Sigma)).min() < -1e-12 * scale:
            raise ConfigError("Sigma must be positive semi-definite")
        radius = spectral_radius(F)
        if radius >= 1:
            raise ConfigError(f"F must be convergent, spectral radius is {radius!r}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Sigma", sym(Sigma))

    @property
    def m(self) -> int:
        return self.F.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @cached_property
    def state_variance(self) -> np.ndarray:
        return lyapunov_solve(self.F, self.Sigma)

    @property
    def gamma0(self) -> np.ndarray:
        return sym(self.H.T @ self.state_variance @ self.H)

    def gamma(self, lag: int) -> np.ndarray:
        return self.H.T @ np.linalg.matrix_power(self.F, lag) @ self.state_variance @ self.H

    @cached_property
    def modes(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Modal split of the autocovariances, Gamma_l = sum_k d_k**l G_k for l >= 1

        None when F is not safely diagonalizable.
        """
        values, vectors = np.linalg.eig(self.F)
        if condition_number(vectors) > MODAL_CONDITION_CAP:
            return None
        left = np.linalg.inv(vectors) @ self.state_variance @ self.H
        right = self.H.T @ vectors
        components = np.einsum("ik,kj->kij", right, left)
        return values, components

    def transformed(self, T: np.ndarray) -> "LatentVarProcess":
        """Process of T y_t"""
        return LatentVarProcess(self.F, self.H @ np.atleast_2d(T).T, self.Sigma)

    @classmethod
    def from_arma(
        cls,
        phi: Sequence[float],
        theta: Sequence[float],
        sigma: Optional[Sequence[float]] = None,
    ) -> "LatentVarProcess":
        """Independent ARMA(1,1) observables y_it = phi_i y_it-1 + e_it + theta_i e_it-1

        Each observable has the two latent states (y_it, e_it).
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if sigma is None:
            sigma = np.ones_like(phi)
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        if not phi.shape == theta.shape == sigma.shape:
            raise ConfigError("ARMA coefficients must have matching lengths")
        blocks = [
            cls(
                F=[[ph, th], [0.0, 0.0]],
                H=[[1.0], [0.0]],
                Sigma=(sg**2) * np.ones((2, 2)),
            )
            for ph, th, sg in zip(phi, theta, sigma)
        ]
        return cls.stack(*blocks)

    @classmethod
    def stack(cls, *processes: "LatentVarProcess") -> "LatentVarProcess":
        """Independent processes side by side"""
        return cls(
            F=scipy.linalg.block_diag(*(p.F for p in processes)),
            H=scipy.linalg.block_diag(*(p.H for p in processes)),
            Sigma=scipy.linalg.block_diag(*(p.Sigma for p in processes)),
        )


@dataclass(frozen=True, eq=False)
class AutocovSeq:
    """Autocovariances Gamma_0..Gamma_L of a stationary process

    Parameters
    ----------
    gammas
        Array of shape (L + 1, n, n) with Gamma_l = E[y_t y_{t-l}']
    tail_rate
        Geometric rate bounding the decay of Gamma_l beyond L
    process
        Latent VAR generating the sequence, when known. It enables closed-form
        geometric sums and lags beyond L.
    """

    gammas: np.ndarray
    tail_rate: float = 0.0
    process: Optional[LatentVarProcess] = None

    def __post_init__(self):
        gammas = np.asarray(self.gammas, dtype=float)
        if gammas.ndim == 1:
            gammas = gammas[:, None, None]
        if gammas.ndim != 3 or gammas.shape[1] != gammas.shape[2]:
            raise ConfigError(f"gammas must be a list of square matrices, got shape {gammas.shape}")
        if gammas.shape[0] < 2:
            raise ConfigError("gammas must hold at least Gamma_0 and Gamma_1")
        if not np.all(np.isfinite(gammas)):
            raise ConfigError("gammas have non-finite entries")
        if not 0 <= self.tail_rate < 1:
            raise ConfigError(f"tail_rate must lie in [0, 1), got {self.tail_rate!r}")
        gamma0 = gammas[0]
        scale = max(np.abs(gamma0).max(), np.finfo(float).tiny)
        if np.abs(gamma0 - gamma0.T).max() > SYMMETRY_TOLERANCE * scale:
            raise ConfigError("Gamma_0 must be symmetric")
        if np.linalg.eigvalsh(sym(gamma0)).min() < -SYMMETRY_TOLERANCE * scale:
            raise ConfigError("Gamma_0 must be positive semi-definite")
        gammas = gammas.copy()
        gammas[0] = sym(gamma0)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "tail_rate", float(self.tail_rate))

    @property
    def L(self) -> int:
        return self.gammas.shape[0] - 1

    @property
    def n(self) -> int:
        return self.gammas.shape[1]

    @property
    def gamma0(self) -> np.ndarray:
        return self.gammas[0]

    @property
    def gamma1(self) -> np.ndarray:
        return self.gammas[1]

    def lag(self, l: int) -> np.ndarray:
        """Gamma_l for any integer l, with Gamma_{-l} = Gamma_l'"""
        if l < 0:
            return self.lag(-l).T
        if l <= self.L:
            return self.gammas[l]
        if self.process is not None:
            return self.process.gamma(l)
        return np.zeros((self.n, self.n))

    def require_nonsingular(self) -> None:
        cond = condition_number(self.gamma0)
        if not cond < CONDITION_CAP:
            raise SingularGamma0(
                f"Gamma_0 is singular or badly conditioned (condition number {cond:.3e}); "
                f"reduce it with rank_reduce first"
            )

    @cached_property
    def roots(self) -> Tuple[np.ndarray, np.ndarray]:
        """Gamma_0^{1/2} and Gamma_0^{-1/2}"""
        self.require_nonsingular()
        return psd_sqrt(self.gamma0)

    def geometric_sum(self, x, derivative: bool = False) -> np.ndarray:
        """sum_{t>=1} x**(t-1) Gamma_t, or its derivative in x, for an array of x

        Closed form through the modes of the latent VAR when available,
        truncated at L otherwise.
        """
        x = np.asarray(x, dtype=float)
        modes = self.process.modes if self.process is not None else None
        if modes is not None:
            values, components = modes
            denominator = 1 - x[..., None] * values
            if derivative:
                weights = values**2 / denominator**2
            else:
                weights = values / denominator
            return np.real(np.tensordot(weights, components, axes=(-1, 0)))

        taus = np.arange(1, self.L + 1)
        if derivative:
            powers = np.where(
                taus > 1, (taus - 1) * np.power(x[..., None], np.maximum(taus - 2, 0)), 0.0
            )
        else:
            powers = np.power(x[..., None], taus - 1)
        return np.tensordot(powers, self.gammas[1:], axes=(-1, 0))


@dataclass(frozen=True, eq=False)
class AutocorrSeq:
    """Symmetrized autocorrelation matrices C_1..C_L

    C_l = Gamma_0^{-1/2} (Gamma_l + Gamma_l')/2 Gamma_0^{-1/2}
    """

    cs: np.ndarray
    source: Optional[AutocovSeq] = None

    def __post_init__(self):
        cs = np.asarray(self.cs, dtype=float)
        if cs.ndim == 1:
            cs = cs[:, None, None]
        if np.abs(cs - np.swapaxes(cs, 1, 2)).max(initial=0.0) > SYMMETRY_TOLERANCE:
            raise ValueError("Autocorrelation matrices must be symmetric")
        cs = sym(cs)
        radii = np.abs(np.linalg.eigvalsh(cs)).max(axis=-1)
        if radii.max() > 1 + SYMMETRY_TOLERANCE:
            lag = int(np.argmax(radii > 1 + SYMMETRY_TOLERANCE)) + 1
            raise ValueError(
                f"Autocorrelation at lag {lag} has spectral radius {radii[lag - 1]:.6f} > 1: "
                "no stationary process has these moments"
            )
        if radii[0] >= 1:
            raise ValueError(
                "Lag-one autocorrelation has spectral radius one: the process is deterministic"
            )
        object.__setattr__(self, "cs", cs)

    @property
    def L(self) -> int:
        return self.cs.shape[0]

    @property
    def n(self) -> int:
        return self.cs.shape[1]

    @property
    def c1(self) -> np.ndarray:
        return self.cs[0]

    def radii(self) -> np.ndarray:
        """Spectral radii rho(C_l) for l = 1..L"""
        return np.abs(np.linalg.eigvalsh(self.cs)).max(axis=-1)

    def geometric_sum(self, x, derivative: bool = False) -> np.ndarray:
        """sum_{t>=1} x**(t-1) C_t (or its derivative in x) for an array of x"""
        x = np.asarray(x, dtype=float)
        if self.source is not None and self.source.process is not None:
            _, inv_root = self.source.roots
            return sym(inv_root @ sym(self.source.geometric_sum(x, derivative)) @ inv_root)

        taus = np.arange(1, self.L + 1)
        if derivative:
            powers = np.where(
                taus > 1, (taus - 1) * np.power(x[..., None], np.maximum(taus - 2, 0)), 0.0
            )
        else:
            powers = np.power(x[..., None], taus - 1)
        return np.tensordot(powers, self.cs, axes=(-1, 0))


@dataclass(frozen=True)
class ErgodicityReport:
    """Outcome of the exponential ergodicity test rho(C_l) <= rho(C_1)**l"""

    is_exp_ergodic: bool
    first_violation_lag: Optional[int]
    margins: np.ndarray
    radii: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        lags = np.arange(1, len(self.radii) + 1)
        return pd.DataFrame(
            {
                "lag": lags,
                "rho_Cl": self.radii,
                "rho_C1_pow_l": self.radii[0] ** lags,
                "margin": self.margins,
            }
        )


@dataclass(frozen=True, eq=False)
class PersistenceComponent:
    rho: float
    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True, eq=False)
class PersistenceDecomposition:
    """Unit-variance components of y ordered by lag-one autocorrelation

    y = sum_i q_i (p_i' y), with the i-th component p_i' y
    """

    components: Tuple[PersistenceComponent, ...]

    @property
    def rhos(self) -> np.ndarray:
        return np.array([c.rho for c in self.components])

    @property
    def P(self) -> np.ndarray:
        return np.column_stack([c.p for c in self.components])

    @property
    def Q(self) -> np.ndarray:
        return np.column_stack([c.q for c in self.components])

    def reconstruct(self, y: np.ndarray) -> np.ndarray:
        """sum_i q_i p_i' y for one vector or for rows of a matrix"""
        y = np.asarray(y, dtype=float)
        return y @ (self.Q @ self.P.T).T

    def to_frame(self) -> pd.DataFrame:
        n = len(self.components)
        frame = pd.DataFrame({"component": np.arange(1, n + 1), "rho": self.rhos})
        for j in range(n):
            frame[f"p_{j + 1}"] = self.P[j]
        for j in range(n):
            frame[f"q_{j + 1}"] = self.Q[j]
        return frame


def autocov_from_var(
    proc: LatentVarProcess, L: Optional[int] = None, check: bool = True
) -> AutocovSeq:
    """Gamma_l = H' F**l V H for l = 0..L

    Parameters
    ----------
    proc
        True latent VAR
    L
        Number of lags. Defaults to the lag at which the tail rate falls below
        the truncation level.
    check
        Require a nonsingular Gamma_0. Disable it before rank_reduce.
    """
    tail_rate = min(spectral_radius(proc.F) + TAIL_MARGIN, 1 - 1e-12)
    if L is None:
        L = truncation_lag(tail_rate)
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L!r}")

    projected = proc.state_variance @ proc.H
    gammas = np.empty((L + 1, proc.n, proc.n))
    for lag in range(L + 1):
        gammas[lag] = proc.H.T @ projected
        projected = proc.F @ projected

    acv = AutocovSeq(gammas=gammas, tail_rate=tail_rate, process=proc)
    if check:
        acv.require_nonsingular()
    return acv


def autocov_from_spec(spec: dict, L: Optional[int] = None) -> AutocovSeq:
    """Autocovariances from a 'process' section of a run configuration

    Accepted forms: F, H and Sigma; gammas and tail_rate; or arma, a mapping
    with lists phi, theta and optionally sigma.
    """
    keys = set(spec)
    try:
        if keys == {"F", "H", "Sigma"}:
            return autocov_from_var(LatentVarProcess(spec["F"], spec["H"], spec["Sigma"]), L)
        if keys == {"arma"}:
            arma = dict(spec["arma"])
            unknown = set(arma) - {"phi", "theta", "sigma"}
            if unknown:
                raise ConfigError(f"Unknown keys in arma spec: {sorted(unknown)}")
            return autocov_from_var(LatentVarProcess.from_arma(**arma), L)
        if keys in ({"gammas", "tail_rate"}, {"gammas"}):
            return AutocovSeq(np.asarray(spec["gammas"], dtype=float), spec.get("tail_rate", 0.0))
    except ConfigError:
        raise
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Invalid process spec: {error}") from error
    raise ConfigError(
        f"A process spec needs F, H and Sigma, or gammas and tail_rate, or arma; got {sorted(keys)}"
    )


def autocorr(acv: AutocovSeq) -> AutocorrSeq:
    """Symmetrized autocorrelation matrices of an autocovariance sequence"""
    _, inv_root = acv.roots
    cs = sym(inv_root @ sym(acv.gammas[1:]) @ inv_root)
    return AutocorrSeq(cs=cs, source=acv)


def check_exponential_ergodicity(
    acs: AutocorrSeq, tol: float = ERGODICITY_TOLERANCE, max_lag: Optional[int] = None
) -> ErgodicityReport:
    """Test rho(C_l) <= rho(C_1)**l at every available lag up to max_lag"""
    radii = acs.radii()
    if max_lag is not None:
        radii = radii[:max_lag]
    lags = np.arange(1, len(radii) + 1)
    margins = radii[0] ** lags - radii
    violations = np.flatnonzero(margins < -tol)
    first = int(lags[violations[0]]) if violations.size else None
    if first is not None:
        logger.debug(f"Exponential ergodicity fails first at lag {first}")
    return ErgodicityReport(
        is_exp_ergodic=first is None,
        first_violation_lag=first,
        margins=margins,
        radii=radii,
    )


def transform_process(acv: AutocovSeq, T: np.ndarray) -> AutocovSeq:
    """Autocovariances of T y_t"""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[1] != acv.n:
        raise ValueError(f"T must have {acv.n} columns, got shape {T.shape}")
    gammas = T @ acv.gammas @ T.T
    cond = condition_number(gammas[0])
    if not cond < CONDITION_CAP:
        raise RankDeficient(
            f"Transformed Gamma_0 is singular (condition number {cond:.3e}); reduce first"
        )
    process = acv.process.transformed(T) if acv.process is not None else None
    return AutocovSeq(gammas=gammas, tail_rate=acv.tail_rate, process=process)


def rank_reduce(
    acv: AutocovSeq, tol: float = RANK_TOLERANCE
) -> Tuple[AutocovSeq, np.ndarray]:
    """Drop redundant observables so that Gamma_0 becomes nonsingular

    Returns the autocovariances of a subvector of y and the n x r lifting
    matrix T with y = T y_reduced.
    """
    values = np.linalg.eigvalsh(acv.gamma0)
    top = values.max(initial=0.0)
    if top <= 0:
        raise SingularGamma0("Gamma_0 is zero: every observable is degenerate")
    rank = int(np.sum(values > tol * top))
    if rank == acv.n:
        return acv, np.eye(acv.n)

    _, _, pivots = scipy.linalg.qr(acv.gamma0, pivoting=True)
    keep = np.sort(pivots[:rank])
    selection = np.eye(acv.n)[keep]
    gammas = selection @ acv.gammas @ selection.T
    process = acv.process.transformed(selection) if acv.process is not None else None
    reduced = AutocovSeq(gammas=gammas, tail_rate=acv.tail_rate, process=process)
    lifting = acv.gamma0[:, keep] @ np.linalg.inv(acv.gamma0[np.ix_(keep, keep)])
    logger.info(f"Reduced {acv.n} observables to {rank} (kept {keep.tolist()})")
    return reduced, lifting


def decompose_persistence(acv: AutocovSeq) -> PersistenceDecomposition:
    """Split y into unit-variance components sorted by |lag-one autocorrelation|"""
    root, inv_root = acv.roots
    values, vectors = sorted_eigh(autocorr(acv).c1)
    return PersistenceDecomposition(
        components=tuple(
            PersistenceComponent(rho=float(a), p=inv_root @ u, q=root @ u)
            for a, u in zip(values, vectors.T)
        )
    )


def sample_autocov(
    path: np.ndarray, lags: int, batches: int = 50
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample autocovariances of a zero-mean path and their batch-means standard errors

    Parameters
    ----------
    path
        Array of shape (periods, n)
    lags
        Largest lag
    batches
        Number of contiguous batches used for the standard errors
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if path.shape[0] == 1:
        path = path.T
    size = path.shape[0] // batches
    estimates = np.empty((batches, lags + 1, path.shape[1], path.shape[1]))
    for b in range(batches):
        chunk = path[b * size : (b + 1) * size]
        for lag in range(lags + 1):
            estimates[b, lag] = chunk[lag:].T @ chunk[: size - lag] / size
    return estimates.mean(axis=0), estimates.std(axis=0, ddof=1) / np.sqrt(batches)
