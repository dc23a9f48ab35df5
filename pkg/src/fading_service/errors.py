"""Exception types shared across the package.

The CLI maps these onto its exit codes: ``DomainError`` -> 2,
``NumericalFailure`` -> 3, ``BudgetExceeded`` -> 4.
"""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalFailure(ArithmeticError):
    """An iterative routine did not reach its tolerance.

    ``partial`` carries the best estimate available when the routine gave up,
    ``error`` its error estimate.
    """

    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error


class BudgetExceeded(RuntimeError):
    """A simulation would draw more samples than the configured budget."""


class UnsupportedOperation(NotImplementedError):
    """The model does not provide the requested operation."""


class InsufficientData(ValueError):
    """Not enough samples or checkpoints to compute a statistic."""
