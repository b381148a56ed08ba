"""Exception types raised across the package."""


class BFMSError(Exception):
    """Base class for all package errors."""


class GridMismatch(BFMSError, ValueError):
    """Two functions or sets do not live on the same grid."""


class ZeroMass(BFMSError, ValueError):
    """A weighted mean was requested with all weights equal to zero."""


class InsufficientData(BFMSError, ValueError):
    pass


class InvalidPartition(BFMSError, ValueError):
    pass


class InvalidExperiment(BFMSError, ValueError):
    """Preconditions of a stability experiment are not met."""


class CoincidentPoint(BFMSError, ValueError):
    """A data member coincides with the evaluation point where a formula divides by the distance."""


class TooFewKnots(BFMSError, ValueError):
    pass


class NoInput(BFMSError, ValueError):
    pass


class SchemaMismatch(BFMSError, ValueError):
    pass


class ConfigError(BFMSError, ValueError):
    pass
