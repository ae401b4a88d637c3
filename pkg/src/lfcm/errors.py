"""Exception hierarchy shared by every module.

Input problems derive from :class:`InputError` (CLI exit code 2), numerical
failures from :class:`NumericalError` (exit code 3).
"""


class LfcmError(Exception):
    pass


class InputError(LfcmError, ValueError):
    pass


class NumericalError(LfcmError, ArithmeticError):
    pass


class NonMonotoneTime(InputError):
    pass


class TooShort(InputError):
    pass


class InvalidParam(InputError):
    pass


class EmptyInput(InputError):
    pass


class BelowThreshold(InputError):
    pass


class DomainError(InputError):
    pass


class TooFewTail(InputError):
    pass


class AllDegenerate(InputError):
    pass


class TooFewGroups(InputError):
    pass


class NoSameCellPairs(InputError):
    pass


class NoRegions(InputError):
    pass


class EmptySet(InputError):
    pass


class EmptyReference(InputError):
    pass


class UnnormalizedInput(InputError):
    pass


class GridMismatch(InputError):
    pass


class EmptyGrid(InputError):
    pass


class EmptyChain(InputError):
    pass


class SchemaError(InputError):
    pass


class EmptyDevice(InputError):
    pass


class NoFeasibleState(InputError):
    pass


class SingularMatrix(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateCDF(NumericalError):
    pass


class FewerComponents(UserWarning):
    """Fewer connected components than requested; all are returned."""
