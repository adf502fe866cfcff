"""Exception types shared across the package."""


class MagError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MagError, ValueError):
    """Malformed or structurally inconsistent input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(MagError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    `residual` carries the achieved residual (or gradient norm) at the cap.
    """

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NumericalError(MagError, RuntimeError):
    """A numerical quantity became non-finite during optimization."""

    def __init__(self, message, round_index=None):
        if round_index is not None:
            message = f"{message} (round {round_index})"
        super().__init__(message)
        self.round_index = round_index
