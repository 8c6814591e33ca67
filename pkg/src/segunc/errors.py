"""Exception hierarchy.

Every failure the engine can report maps onto one of three CLI exit codes:
input errors (2), geometry mismatches (3) and degenerate metric inputs (4).
"""


class SegUncError(Exception):
    """Base class for all engine errors."""

    exit_code = 2


class InputError(SegUncError):
    """Malformed or invalid input (bad file, bad parameter, NaN values)."""


class GeometryMismatch(SegUncError):
    exit_code = 3


class DegenerateInput(SegUncError):
    """A metric is undefined for the given input (e.g. a single error class)."""

    exit_code = 4


# grid-core
class ConstantField(InputError):
    pass


class RangeViolation(InputError):
    pass


class UnknownClass(InputError):
    pass


# geometry
class EmptySurface(DegenerateInput):
    pass


class InvalidBandSpec(InputError):
    pass


class InvalidSigma(InputError):
    pass


# metrics
class DegenerateRegion(DegenerateInput):
    pass


class EmptyBands(DegenerateInput):
    pass


class SingleClass(DegenerateInput):
    pass


class NoPositives(DegenerateInput):
    pass


class InvalidWindow(InputError):
    pass


class NoCorrectVoxels(DegenerateInput):
    pass


class NoIncorrectVoxels(DegenerateInput):
    pass


# statistics
class EmptySample(DegenerateInput):
    pass


class ZeroVariance(DegenerateInput):
    pass


class AllDegenerate(DegenerateInput):
    pass


class DegenerateMatrix(DegenerateInput):
    pass


class InconsistentCases(InputError):
    pass


# phantoms
class ConfigInvalid(InputError):
    pass


# file formats
class FormatError(InputError):
    pass


class BadMagic(FormatError):
    pass


class BadHeader(FormatError):
    pass


class UnsupportedDatatype(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class DimMismatch(FormatError):
    pass


class FortranOrderUnsupported(FormatError):
    pass
