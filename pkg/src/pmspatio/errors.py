"""Exception hierarchy shared by every module."""


class PmspatioError(Exception):
    """Base class for all errors raised by pmspatio."""


# data
class MissingColumn(PmspatioError, KeyError):
    pass


class NonDailyDates(PmspatioError, ValueError):
    pass


class DuplicateStationDay(PmspatioError, ValueError):
    pass


class MissingCovariate(PmspatioError, ValueError):
    pass


class UnknownCovariate(PmspatioError, KeyError):
    pass


class InvalidDataset(PmspatioError, ValueError):
    pass


# numerics
class NonFiniteInput(PmspatioError, ValueError):
    pass


class NotPositiveDefinite(PmspatioError, ValueError):
    pass


class DuplicateLocationWithoutJitter(NotPositiveDefinite):
    pass


class NoConvergence(PmspatioError, RuntimeError):
    pass


# variogram
class EmptyField(PmspatioError, ValueError):
    pass


class DegenerateGrid(PmspatioError, ValueError):
    pass


# models
class AllMissing(PmspatioError, ValueError):
    pass


class TargetOutsideDateRange(PmspatioError, ValueError):
    pass


class MissingTargetCovariate(PmspatioError, ValueError):
    pass


class TooFewDistinctValues(PmspatioError, ValueError):
    pass


class RankDeficientDesign(PmspatioError, ValueError):
    pass


class EmptyInput(PmspatioError, ValueError):
    pass


class NoNeighbors(PmspatioError, ValueError):
    pass


# evaluation
class LengthMismatch(PmspatioError, ValueError):
    pass


class UnknownVariable(PmspatioError, KeyError):
    pass
