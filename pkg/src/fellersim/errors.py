"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on the inputs is violated."""


class NumericFailure(RuntimeError):
    """A numeric routine did not converge within its budget.

    Carries a residual estimate when one is available, so callers can
    report how far the computation was from its tolerance.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConstructionFailure(RuntimeError):
    """A constructive recipe (e.g. de la Vallee-Poussin) cannot proceed.

    ``level`` names the first stage of the construction that failed.
    """

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class GridCoverageError(InvalidArgument):
    """A shared histogram grid misses too much mass for a probe point."""

    def __init__(self, message, probe=None, overflow_fraction=None):
        super().__init__(message)
        self.probe = probe
        self.overflow_fraction = overflow_fraction
