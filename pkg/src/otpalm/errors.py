"""Exception types raised by the solver stack."""


class OTPalmError(Exception):
    """Base class for all package errors."""


class NegativeMarginal(OTPalmError, ValueError):
    pass


class InvalidMass(OTPalmError, ValueError):
    pass


class DimensionMismatch(OTPalmError, ValueError):
    pass


class NonDescentDirection(OTPalmError):
    pass


class MaxBacktracks(OTPalmError):
    pass


class MaxInnerIterations(OTPalmError):
    pass


class CriterionViolated(OTPalmError):
    pass


class RateUndefined(OTPalmError, ValueError):
    pass


class EmptySupport(OTPalmError, ValueError):
    pass


class Infeasible(OTPalmError):
    pass


class TooLarge(OTPalmError):
    pass


class MaxIters(OTPalmError):
    pass


class InstanceFormatError(OTPalmError, ValueError):
    pass
