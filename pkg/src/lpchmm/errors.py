"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without a lookup table.
"""


class LpcHmmError(Exception):
    exit_code = 2


class UsageError(LpcHmmError, ValueError):
    """Invalid configuration or argument values."""

    exit_code = 1


class DataError(LpcHmmError, ValueError):
    """Input data that cannot be processed."""

    exit_code = 2


class NumericError(LpcHmmError, ArithmeticError):
    """Numerical or training failure."""

    exit_code = 3


# signal_io
class MalformedHeader(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class EmptyAudio(DataError):
    pass


class InvalidLength(UsageError):
    pass


class ClipTooShort(DataError):
    pass


# lpc
class LagTooLarge(UsageError):
    pass


class ZeroEnergy(DataError):
    pass


class NumericalBreakdown(NumericError):
    pass


class DegenerateModel(DataError):
    pass


class NoUsableFrames(DataError):
    def __init__(self, message="no usable frames"):
        super().__init__(message)


# quantizer
class TooFewVectors(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# hmm
class InvalidModel(UsageError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class LengthMismatch(DataError):
    pass


class SymbolOutOfRange(IndexOutOfRange):
    pass


class SequenceTooLong(UsageError):
    pass


class EmptyTrainingSet(DataError):
    pass


# recognizer
class InsufficientClasses(DataError):
    def __init__(self, message="need at least 2 classes"):
        super().__init__(message)


class EmptyClass(DataError):
    pass


class EmptyEvaluationSet(DataError):
    pass


class UnknownLabel(DataError):
    pass


# persistence
class ModelFormatError(DataError):
    pass
