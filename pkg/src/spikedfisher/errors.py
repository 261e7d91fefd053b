"""Error types shared across the package.

Two failure classes are distinguished so that callers (and the command line
front end) can map them to different exit codes: bad inputs versus numerical
breakdown at valid inputs.
"""


class ParameterError(ValueError):
    """A parameter, configuration value, or argument violates its contract."""


class NumericalError(RuntimeError):
    """A numerical routine failed at inputs that passed validation."""
