"""Exception hierarchy shared across the package."""


class MplqError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(MplqError):
    """An instance-generator or solver configuration is invalid."""


class InstanceFormatError(MplqError):
    """An instance/solution file could not be parsed or fails schema checks."""


class ParameterError(MplqError):
    """A numeric argument is outside its valid domain (e.g. zero speed)."""


class ShapeError(MplqError):
    """A state or matrix has the wrong dimensions or references unknown ids."""


class NothingToSolveError(MplqError):
    """The task pool is empty, so there is no allocation/sequencing problem."""


class SearchSpaceLimitError(MplqError):
    """Exhaustive enumeration was refused because the space is too large."""

    def __init__(self, cardinality: int, limit: int):
        self.cardinality = cardinality
        self.limit = limit
        super().__init__(
            f"search space holds {cardinality} states, above the enumeration limit {limit}"
        )


class UndefinedRateError(MplqError):
    """An improvement rate is undefined because the baseline reward is zero."""
