"""Exception hierarchy shared across the package."""


class FairDegradeError(Exception):
    """Base class for all package errors."""


class DataError(FairDegradeError, ValueError):
    """Input data is unusable."""


class MissingColumn(DataError):
    pass


class EmptyAfterFilter(DataError):
    pass


class SingleGroup(DataError):
    pass


class ParseError(DataError):
    pass


class GroupVanished(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class ConfigError(FairDegradeError, ValueError):
    """Invalid parameters (k, budget, sizes)."""


class KTooLarge(ConfigError):
    pass


class EmptyCenters(ConfigError):
    pass


class TooLarge(ConfigError):
    """Exhaustive enumeration would exceed the combinatorial guard."""


class StagnationError(FairDegradeError, RuntimeError):
    """The attack loop stopped making progress (floating-point tie pathology)."""
