"""Exception hierarchy.

Numeric failures derive from :class:`NumericError`, integrity failures from
:class:`IntegrityError`; the CLI maps them to distinct exit codes.
"""


class CavityBandError(Exception):
    """Base class for all package errors."""


class ConfigError(CavityBandError, ValueError):
    pass


class NumericError(CavityBandError):
    pass


class IntegrityError(CavityBandError):
    pass


# numerics
class NonConvergence(NumericError):
    pass


class LengthNotPowerOfTwo(NumericError, ValueError):
    pass


class UnderdeterminedFit(NumericError, ValueError):
    pass


class IllConditioned(NumericError):
    pass


class InsufficientSamples(NumericError, ValueError):
    pass


# floquet
class Diverged(NumericError):
    pass


class ExpansionPole(NumericError, ValueError):
    pass


# wavepacket
class BadExtent(NumericError, ValueError):
    pass


class PacketTooWide(NumericError, ValueError):
    pass


class ZoneBoundaryOverlap(NumericError, ValueError):
    pass


class NormDrift(IntegrityError):
    pass


class EmptySelection(NumericError):
    pass


class FitDegenerate(NumericError):
    pass


class TooFewOscillations(NumericError):
    pass


# scattering
class NotAGap(NumericError, ValueError):
    pass


class NoHoleDetected(NumericError):
    pass


class NotCleared(NumericError):
    """Raised only on request; run_scatter normally reports it as a warning field."""
