"""Exception hierarchy shared by all engine modules.

Two families matter for the CLI exit-code contract: ``ValidationError``
(bad values or inconsistent inputs, exit code 1) and ``InputError``
(unreadable or malformed files, exit code 2).
"""


class EngineError(Exception):
    pass


class ValidationError(EngineError):
    pass


class InputError(EngineError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidRle(ValidationError):
    pass


# Alias used by the detection-file reader.
RleInvalid = InvalidRle


class InvalidDims(ValidationError):
    pass


class NonInvertibleTransform(ValidationError):
    pass


class ClassOutOfRange(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class MissingScore(ValidationError):
    pass


class ScorerNotTrained(ValidationError):
    pass


class DegenerateData(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class UnknownImage(ValidationError):
    pass


class UndecodableMask(ValidationError):
    pass


class PlacementFailure(ValidationError):
    pass


class UnknownLabel(ValidationError):
    pass


class DegeneratePolygon(ValidationError):
    pass


class ParseError(InputError):
    pass


class UnsupportedFormat(InputError):
    pass


class UseAfterClose(ValidationError):
    pass
