"""Exception types raised by netobj."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (eigen-solver, degenerate density fit)."""


class LoadError(ValueError):
    """Input files could not be parsed into a dataset."""
