"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for every error raised by dflsim."""


class InputError(SimulationError, ValueError):
    """An operation received arguments outside its contract."""


class DegenerateMatrixError(InputError):
    """Matrix too small for the requested statistic (callers may fall back)."""


class NumericError(SimulationError, ArithmeticError):
    """An iterative numeric routine failed to converge."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class IdxFormatError(SimulationError, ValueError):
    """Malformed IDX file: bad magic, bad header, or truncated payload."""


class DataConsistencyError(SimulationError, ValueError):
    """Image and label files disagree with each other."""


class ConfigError(SimulationError, ValueError):
    """Invalid experiment configuration."""


class RunError(SimulationError, RuntimeError):
    """An experiment run aborted; the message names the round and client."""
