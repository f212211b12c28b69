"""Exception hierarchy shared by the solvers and the CLI."""


class JumpMfgError(Exception):
    """Base class for package errors."""


class ConfigError(JumpMfgError, ValueError):
    """Invalid population spec, config file, or solver setting."""


class SolverError(JumpMfgError, ArithmeticError):
    """Scalar root solve failed (non-finite intermediate, bracket failure)."""

    def __init__(self, message, index=None, agent=None):
        super().__init__(message)
        self.index = index
        self.agent = agent


class ConvergenceError(JumpMfgError, RuntimeError):
    """Fixed-point iteration hit its iteration cap."""

    def __init__(self, message, residual, trace):
        super().__init__(message)
        self.residual = residual
        self.trace = trace


class SimulationError(JumpMfgError, ArithmeticError):
    """Utility exponent would overflow."""

    def __init__(self, message, max_exponent):
        super().__init__(message)
        self.max_exponent = max_exponent
