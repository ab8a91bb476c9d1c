"""Exception types raised by the solvers and model builders."""


class NccpError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NccpError, ValueError):
    pass


class ConfigError(NccpError, ValueError):
    """Invalid solver configuration or missing problem constants."""


class IncompatibleOracle(NccpError, ValueError):
    """Oracle tags do not support the requested operation."""


class InnerSolverError(NccpError, RuntimeError):
    """An inner iterative solve hit its iteration cap."""


class BacktrackingError(NccpError, RuntimeError):
    """The step-size search exhausted its shrink budget.

    Usually means the oracle constants (or the oracles themselves) are
    inconsistent, e.g. a gradient that does not match its function.
    """


class DivergenceError(NccpError, RuntimeError):
    pass
