"""Exception hierarchy shared by all modules."""


class VolterraLevyError(Exception):
    """Base class for package errors."""


class KernelDomainError(VolterraLevyError, ValueError):
    """Kernel evaluated at or beyond the diagonal where it is singular."""


class UnsupportedOrderError(VolterraLevyError, ValueError):
    """Requested derivative order exceeds what the kernel provides."""


class InvalidMeasureError(VolterraLevyError, ValueError):
    pass


class ShellRangeError(VolterraLevyError, IndexError):
    pass


class BudgetError(VolterraLevyError, RuntimeError):
    """Expected jump count of a simulation exceeds the budget."""

    def __init__(self, message, j_max=None):
        super().__init__(message)
        self.j_max = j_max


class ToleranceError(VolterraLevyError, RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ScaleError(VolterraLevyError, ValueError):
    pass


class InsufficientScalesError(VolterraLevyError, ValueError):
    pass


class ConsistencyError(VolterraLevyError, ValueError):
    pass


class ConfigError(VolterraLevyError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class MissingArtifactError(VolterraLevyError, FileNotFoundError):
    pass
