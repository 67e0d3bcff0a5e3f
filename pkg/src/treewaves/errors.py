"""Exception types shared across the package.

Two failure families matter to callers: bad inputs (rejected up front, CLI exit
code 2) and internal numerical trouble discovered mid-computation (CLI exit
code 1).
"""


class ValidationError(ValueError):
    """A parameter or input fails its documented precondition."""


class NumericalError(RuntimeError):
    """An internal consistency or convergence check failed during computation."""
