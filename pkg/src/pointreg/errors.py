"""Exception taxonomy shared across the library.

The CLI maps these onto exit codes: format/parse failures exit 2,
shape/precondition violations exit 3, numerical degeneracies exit 4.
"""


class PointregError(Exception):
    """Base class for all library errors."""


class FormatError(PointregError):
    """A file could not be parsed or violates its declared layout (exit 2)."""


class MalformedHeaderError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass


class UnsupportedPropertyError(FormatError):
    pass


class WrongChannelCountError(FormatError):
    pass


class MissingKeyError(FormatError):
    pass


class NonOrthonormalRotationError(FormatError):
    pass


class BadShapeError(FormatError):
    pass


class PreconditionError(PointregError):
    """Inputs have inconsistent shapes or violate a call contract (exit 3)."""


class DimensionMismatchError(PreconditionError):
    pass


class MixedResolutionError(PreconditionError):
    pass


class LengthMismatchError(PreconditionError):
    pass


class ProvenanceMismatchError(PreconditionError):
    pass


class EmptyReferenceError(PreconditionError):
    pass


class EmptyPredictionError(PreconditionError):
    pass


class EmptyCloudError(PreconditionError):
    pass


class NoValidPairsError(PreconditionError):
    pass


class DegeneracyError(PointregError):
    """The input geometry does not determine a solution (exit 4)."""


class TooFewPairsError(DegeneracyError):
    pass


class DegenerateGeometryError(DegeneracyError):
    pass


class NonPositiveScaleError(DegeneracyError):
    pass
