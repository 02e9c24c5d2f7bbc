"""Exception and warning types shared across the package."""


class BcMaskError(Exception):
    """Base class for all package-specific errors."""


class InvalidMatrixError(BcMaskError):
    """A matrix argument is malformed: non-finite, non-square, or asymmetric."""


class ShapeError(BcMaskError):
    """Dimensions of related objects do not agree."""


class NotPositiveDefiniteError(BcMaskError):
    """A matrix required to be positive definite failed its Cholesky factorization."""


class InfeasibleStrategyError(BcMaskError):
    """A transmit strategy violates the power-split feasibility constraints.

    Carries the full feasibility report when available.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DomainError(BcMaskError):
    """A scalar argument is outside its admissible range (e.g. a weight <= 1)."""


class DegradednessRequiredError(BcMaskError):
    """The operation needs K_Z1 <= K_Z2 in the PSD order and the channel is not degraded."""


class MaxIterationsError(BcMaskError):
    """An iterative solver exhausted its budget without meeting tolerance.

    ``best`` holds the best iterate found and ``grad_norm`` its projected
    gradient norm.
    """

    def __init__(self, message, best=None, grad_norm=None):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm


class EnhancementFailedError(BcMaskError):
    """The constructed enhanced noises violate an ordering, proportionality,
    or complementary-slackness invariant beyond tolerance."""


class QuadratureError(BcMaskError):
    """Adaptive quadrature did not reach the requested accuracy."""


class InfeasibleError(BcMaskError):
    """No strategy satisfies the requested leakage budgets."""


class DegenerateSampleError(BcMaskError):
    """A sample covariance matrix is singular; estimates are undefined."""


class DegenerateConditioningWarning(UserWarning):
    """A conditioning block was singular; a pseudo-inverse was used."""


class DegenerateChannelWarning(UserWarning):
    """A state or noise covariance is singular; boundary semantics apply."""


class NegativeRateWarning(UserWarning):
    """A computed rate or leakage was slightly negative and was clamped to zero."""


class LowSampleWarning(UserWarning):
    """Sample size is too small for reliable plug-in estimates."""


class MonotonicityWarning(UserWarning):
    """A sweep output violates an expected monotonicity, likely solver noise."""
