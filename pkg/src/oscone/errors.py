"""Exception types raised across the toolkit."""


class OsconeError(ValueError):
    """Base class for all toolkit errors."""


class NotHermitian(OsconeError):
    pass


class NotSelfAdjoint(OsconeError):
    pass


class DimensionMismatch(OsconeError):
    pass


class SizeMismatch(OsconeError):
    pass


class NotPositive(OsconeError):
    pass


class NotInMaxCone(OsconeError):
    """Raised when a factorization is requested for an element that was not
    certified in the maximal cone."""


class Malformed(OsconeError):
    pass


class PreconditionViolated(OsconeError):
    pass
