"""Exception hierarchy. The CLI maps these onto exit codes."""


class DriftkitError(Exception):
    pass


class InvalidBandwidthError(DriftkitError, ValueError):
    pass


class InvalidModelError(DriftkitError, ValueError):
    pass


class SimulationDivergedError(DriftkitError, ArithmeticError):
    def __init__(self, path_index: int, time: float, message: str | None = None):
        self.path_index = path_index
        self.time = time
        super().__init__(message or f"simulation diverged on path {path_index} at t={time:.6g}")


class DegenerateDensityError(DriftkitError, ArithmeticError):
    pass


class DegenerateWeightsError(DriftkitError, ArithmeticError):
    pass


class InsufficientPathsError(DriftkitError, ValueError):
    pass


class SelectionFailedError(DriftkitError):
    pass


class ExperimentFailedError(DriftkitError):
    """Raised when too many replications fail."""

    def __init__(self, message: str, failures: int = 0, replications: int = 0):
        self.failures = failures
        self.replications = replications
        super().__init__(message)


class ReplicationError(DriftkitError):
    def __init__(self, rep_index: int, cause: Exception):
        self.rep_index = rep_index
        self.cause = cause
        super().__init__(f"replication {rep_index} failed: {cause}")
