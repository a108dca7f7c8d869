"""Exception hierarchy. The CLI maps these onto exit codes."""


class DepthAllocError(Exception):
    exit_code = 1


class DomainError(DepthAllocError, ValueError):
    """Input outside the physical/mathematical domain of an operation."""
    exit_code = 2


class ConfigError(DepthAllocError, ValueError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class GridMismatchError(DepthAllocError, ValueError):
    exit_code = 2


class GeometricLimitError(DomainError):
    """Disparity stepping past the distance where one acuity step spans infinity."""

    def __init__(self, message, z_limit):
        self.z_limit = z_limit
        super().__init__(f"{message} (geometric limit z = I/delta = {z_limit:.6g} m)")


class SolverError(DepthAllocError, RuntimeError):
    exit_code = 3


class SolverTimeout(SolverError):
    """Raised when branch-and-bound runs out of time.

    Carries the best incumbent found so far and the remaining bound gap.
    """

    def __init__(self, message, incumbent=None, gap=None):
        self.incumbent = incumbent
        self.gap = gap
        super().__init__(message)
