"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` used by the CLI to
print ``error:<kind>:<message>`` diagnostics.  ``ValidationFailure``
subclasses map to exit code 2, ``RuntimeFailure`` subclasses to exit code 3.
"""


class PenalvolError(Exception):
    kind = "PenalvolError"


class ValidationFailure(PenalvolError):
    """Bad input or violated precondition, detected before or instead of a run."""


class RuntimeFailure(PenalvolError):
    """Something went wrong while a computation was running."""


# -- model / penalty preconditions -------------------------------------------

class InvalidMach(ValidationFailure):
    kind = "InvalidMach"


class InvalidRank(ValidationFailure):
    kind = "InvalidRank"


class RankDeficient(ValidationFailure):
    kind = "RankDeficient"


class PreconditionViolation(ValidationFailure):
    kind = "PreconditionViolation"


class NonConstantSignature(ValidationFailure):
    kind = "NonConstantSignature"


class NonCharacteristicViolated(ValidationFailure):
    kind = "NonCharacteristicViolated"


class BoundaryIncompatible(ValidationFailure):
    kind = "BoundaryIncompatible"


class GridMismatch(ValidationFailure):
    kind = "GridMismatch"


class InsufficientRowsAboveFloor(ValidationFailure):
    kind = "InsufficientRowsAboveFloor"


class ParseError(ValidationFailure):
    kind = "ParseError"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class ConfigValidationError(ValidationFailure):
    kind = "ValidationError"


# -- runtime ------------------------------------------------------------------

class NonPositiveDensity(RuntimeFailure):
    kind = "NonPositiveDensity"


class NonFiniteInput(RuntimeFailure):
    kind = "NonFiniteInput"


class NonFiniteState(RuntimeFailure):
    kind = "NonFiniteState"


class CFLViolation(RuntimeFailure):
    kind = "CFLViolation"


class SingularSystem(RuntimeFailure):
    kind = "SingularSystem"


class DissipativityLost(RuntimeFailure):
    kind = "DissipativityLost"


class InsufficientCheckpoints(RuntimeFailure):
    kind = "InsufficientCheckpoints"


class BlowUp(RuntimeFailure):
    kind = "BlowUp"

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)
