"""Exception types shared across the package."""


class FwspError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FwspError):
    """Shapes of theta, features, or variances disagree."""


class DomainViolation(FwspError):
    """A parameter lies outside the natural domain of its family."""


class NonUniqueBestArm(FwspError):
    """Two or more arms tie (exactly) for the highest mean reward."""


class NonsmoothPoint(FwspError):
    """A gradient was requested where the payoff is not classically
    differentiable."""


class ScenarioOutOfSpan(NonsmoothPoint):
    """The scenario direction leaves the active feature span; the divergence
    is zero there and its minimizer is not unique."""


class CholeskyFailure(FwspError):
    """Posterior covariance is not positive definite (ridge misconfigured)."""


class TooManyGridPoints(FwspError):
    """The requested simplex lattice is too large to enumerate."""


class ConfigError(FwspError):
    """An experiment configuration failed to parse or validate."""
