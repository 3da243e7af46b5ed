"""Exception hierarchy.

Exceptions are grouped so that the command line front end can map them to
exit codes: configuration problems, data problems and learner failures.
"""


class FlatNestError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FlatNestError):
    pass


class DataError(FlatNestError):
    pass


class NonBinaryLabels(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row
        self.message = message

    def __reduce__(self):
        return type(self), (self.row, self.message)


class TooFewInstances(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class UnknownLearner(ConfigError):
    pass


class InvalidHyperPoint(ConfigError):
    pass


class LearnerError(FlatNestError):
    pass


class SingleClassTrainingSet(LearnerError):
    pass


class DimensionMismatch(LearnerError):
    pass


class EmptyTestSet(LearnerError):
    pass


class LearnerFailure(LearnerError):
    """A learner raised while a study cell was being computed."""


class EmptyCandidateSet(FlatNestError):
    pass


class MismatchedRecords(FlatNestError):
    pass


class IncompleteTable(FlatNestError):
    pass


class InsufficientRepetitions(FlatNestError):
    pass


class EmptySample(FlatNestError):
    pass


class IncompleteMatrix(FlatNestError):
    pass


class IncompleteStudy(FlatNestError):
    pass
