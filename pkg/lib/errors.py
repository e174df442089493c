"""Exception hierarchy shared by the theory modules and the command line."""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class RobustGapError(Exception):
    """Base class for every error raised by robustgap."""

    exit_code = EXIT_NUMERICAL


class ConfigError(RobustGapError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)

    exit_code = EXIT_CONFIG


class DomainError(RobustGapError, ValueError):
    """Parameters outside the region where a formula is defined."""


class NumericalError(RobustGapError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, estimate: Any = None, error_bound: Optional[float] = None):
        self.estimate = estimate
        self.error_bound = error_bound
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error_bound!r})")


class IllConditionedError(NumericalError):
    pass


class InconsistentSystemError(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class DegenerateDistributionError(RobustGapError):
    """A pushforward with zero scale, i.e. a point mass at `location`."""

    def __init__(self, location: float):
        self.location = location
        super().__init__(f"degenerate distribution: point mass at {location!r}")


class DegenerateClassifierError(RobustGapError):
    """The robust solution is v = 0; `certificate` records why."""

    def __init__(self, message: str, certificate: Dict[str, float]):
        self.certificate = certificate
        super().__init__(f"{message} {certificate}")


class TrainingDivergenceError(NumericalError):
    def __init__(self, message: str, trace: list):
        self.trace = trace
        super().__init__(f"{message} after {len(trace)} epochs")
