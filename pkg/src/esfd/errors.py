"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid arguments or a request the caller should not have made."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""


class EvaluationError(ArithmeticError):
    """An objective returned a non-finite value.

    ``index`` is the sample index, or ``None`` when the failure happened at
    the centre point itself.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalConsistencyError(ArithmeticError):
    """Two routes to the same quantity disagree beyond tolerance."""
