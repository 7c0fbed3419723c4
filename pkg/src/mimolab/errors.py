"""Exception hierarchy shared by all mimolab modules."""


class MimolabError(Exception):
    """Base class for every error raised by mimolab."""

    exit_code = 1


class ConfigError(MimolabError, ValueError):
    """Invalid scenario or experiment configuration."""

    exit_code = 2


class RegimeError(MimolabError, ArithmeticError):
    """A deterministic-equivalent quantity left its valid asymptotic regime
    (e.g. a non-positive Delta or psi)."""

    exit_code = 3


class ConvergenceError(RegimeError):
    """Fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MisuseError(MimolabError, ValueError):
    """An operation was called with arguments outside its contract."""

    exit_code = 2
