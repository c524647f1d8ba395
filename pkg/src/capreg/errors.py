"""Exception hierarchy.

Three top-level families map onto CLI exit codes: configuration problems (2),
bad data (3) and solver failures (4).
"""


class CapError(Exception):
    exit_code = 1


class ConfigError(CapError):
    exit_code = 2


class DataError(CapError):
    exit_code = 3


class SolverError(CapError):
    exit_code = 4


class DimensionMismatch(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, column):
        super().__init__(f"column {column} has zero sample variance")
        self.column = column


class NonFiniteData(DataError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class InvalidNorm(ConfigError):
    pass


class NormMismatch(ConfigError):
    pass


class InvalidGrouping(ConfigError):
    pass


class CyclicGraph(ConfigError):
    pass


class NotATree(ConfigError):
    pass


class InvalidShape(ConfigError):
    pass


class UnknownIndex(ConfigError):
    pass


class InvalidK(ConfigError):
    pass


class OverlappingGroups(ConfigError):
    pass


class WrongNorms(ConfigError):
    pass


class UnsupportedSolver(ConfigError):
    pass


class FoldTooSmall(ConfigError):
    pass


class SchemeUnavailable(ConfigError):
    pass


class NotPSD(DataError):
    pass


class NonConvexNorms(ConfigError):
    pass


class EmptyCandidateSet(SolverError):
    pass


class DegenerateDesign(SolverError):
    pass


class StepBudgetExceeded(SolverError):
    pass
