# -*- coding: utf-8 -*-


class ParsimonyError(Exception):
    """Base class of every error raised by parsimony"""


class ConfigError(ParsimonyError, ValueError):
    """Invalid run configuration, preset or input shape"""


class NumericalError(ParsimonyError):
    """A solver could not produce a valid answer"""


class NonConvergent(NumericalError):
    """An iteration did not converge, usually because its input is not stable"""


class NumericalFailure(NumericalError):
    """A computed solution fails its own residual check"""


class SingularGamma0(NumericalError, ValueError):
    """Lag-zero autocovariance is singular or badly conditioned"""


class RankDeficient(NumericalError, ValueError):
    """A transformation collapses the observable onto a singular subspace"""


class SupportMismatch(NumericalError):
    """The subjective support does not cover the support of the truth"""


class NotExponentiallyErgodic(NumericalError):
    """Autocorrelations decay slower than the lag-one rate at some lag"""


class AsymmetricGamma1(NumericalError, ValueError):
    """Lag-one autocovariance is not symmetric"""

    def __init__(self, asymmetry: float, tolerance: float):
        self.asymmetry = asymmetry
        super().__init__(
            f"Lag-one autocovariance is not symmetric: "
            f"|G1 - G1'| = {asymmetry:.3e} > {tolerance:.1e}"
        )


class InvalidD(ParsimonyError, ValueError):
    """Requested number of states is outside 1..n"""


class InvalidSolution(NumericalError):
    """Reconstructed state-space model is not a valid model"""


class NoConvergence(NumericalError):
    """Equilibrium fixed point not found"""

    def __init__(self, message: str, residuals=None):
        self.residuals = list(residuals or [])
        super().__init__(message)


class VerificationFailed(NumericalError):
    """A fixed point violates the conjecture it was computed under"""


class SingularOmegaCov(NumericalError):
    """Covariance of the forward-guidance conditioning set is singular"""

    def __init__(self, condition_number: float):
        self.condition_number = condition_number
        super().__init__(
            f"Conditioning-set covariance is numerically singular "
            f"(condition number {condition_number:.3e})"
        )


class UnstableLaw(NumericalError, ValueError):
    """Transition matrix of a law of motion is not convergent"""


class RankDeficientH(ParsimonyError, ValueError):
    """Loading matrix does not have full row rank"""
