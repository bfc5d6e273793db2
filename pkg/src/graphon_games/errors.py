"""Exception categories shared by the solvers and mapped to CLI exit codes."""


class GraphonGameError(Exception):
    exit_code = 1


class ConfigError(GraphonGameError, ValueError):
    exit_code = 2


class ConditionViolation(GraphonGameError):
    """A sufficient condition (contraction, spectral radius, feasibility) fails."""

    exit_code = 3


class NonConvergence(GraphonGameError):
    """An iteration ran out of budget or diverged; `last` holds the final iterate."""

    exit_code = 4

    def __init__(self, message: str, last=None, residual: float = float("nan")):
        super().__init__(message)
        self.last = last
        self.residual = residual
