"""Exception hierarchy shared by all modules."""


class QslError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QslError, ValueError):
    pass


class HermiticityError(QslError, ValueError):
    pass


class StateError(QslError, ValueError):
    """Zero vector, non-finite entries, or a normalized state that is not."""


class MatrixOverflowError(QslError, OverflowError):
    pass


class FilteredOutError(QslError):
    """Survival probability underflowed: the state was fully filtered out."""


class StepSizeError(QslError):
    pass


class CommutatorError(QslError, ValueError):
    pass


class RadicandError(QslError):
    """Speed radicand significantly negative; the inputs are inconsistent."""


class ConfigError(QslError, ValueError):
    pass
