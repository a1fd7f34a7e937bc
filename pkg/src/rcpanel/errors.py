"""Exception types raised across the package."""


class RCPanelError(Exception):
    """Base class for all package errors."""


class InvalidParameter(RCPanelError, ValueError):
    """A parameter lies outside its documented domain."""


class DegenerateHasNoTail(InvalidParameter):
    pass


class InfiniteCovariance(InvalidParameter):
    pass


class InvalidBeta(InvalidParameter):
    pass


class BetaOutOfRange(InvalidParameter):
    pass


class UnsupportedBeta(InvalidParameter):
    pass


class UnsupportedRegime(InvalidParameter):
    """Rate exactly at a boundary where no limit law is available."""


class NonIntegrable(InvalidParameter):
    pass


class LagOutOfRange(InvalidParameter):
    pass


class TauOutOfRange(InvalidParameter):
    pass


class TauBeyondHorizon(InvalidParameter):
    pass


class TruncationInvalid(InvalidParameter):
    pass


class InvalidMode(InvalidParameter):
    pass


class TailEstimateOutOfRange(InvalidParameter):
    pass


class NotAStableLaw(InvalidParameter):
    pass


class TooFewSamples(InvalidParameter):
    pass


class NoExceedances(RCPanelError):
    pass


class NumericalFailure(RCPanelError, ArithmeticError):
    """A quadrature or root search did not reach its tolerance."""
