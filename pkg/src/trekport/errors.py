"""Exception hierarchy.

Everything raised on purpose derives from TrekportError so the CLI can map
protocol failures to exit code 1 and configuration failures to exit code 2.
"""


class TrekportError(Exception):
    """Base class for protocol-level failures."""


class DimensionCapError(TrekportError, ValueError):
    """Joint register would exceed the configured dimension cap."""


class DimensionMismatchError(TrekportError, ValueError):
    pass


class UnknownFactorError(TrekportError, KeyError):
    pass


class ZeroProbabilityError(TrekportError, ValueError):
    """Requested measurement outcome has (numerically) zero probability."""


class NonHermitianError(TrekportError, ValueError):
    pass


class NonCommutingError(TrekportError, ValueError):
    """Decomposition terms do not commute pairwise."""


class TimeReversalError(TrekportError, ValueError):
    """Hamiltonian is not invariant under the supplied reversal operator."""


class MemorySlotError(TrekportError, ValueError):
    """Illegal store/recall/teleport on a FILO memory."""


class PreconditionError(TrekportError, ValueError):
    pass


class ParameterMismatchError(TrekportError, ValueError):
    pass


class ConfigError(Exception):
    """Invalid scenario configuration; message names the offending field."""
