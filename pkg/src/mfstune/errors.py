"""Exception hierarchy shared by all modules."""


class MfsTuneError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(MfsTuneError, ValueError):
    pass


class GeometryError(MfsTuneError, ValueError):
    """Degenerate head model or fictitious boundary placement."""


class DomainError(MfsTuneError, ValueError):
    """A dipole or evaluation point outside its admissible domain."""


class ConvergenceError(MfsTuneError, ArithmeticError):
    pass


class SingularityError(MfsTuneError, ArithmeticError):
    """Kernel evaluated at (or numerically on top of) its own center."""


class RankFailure(MfsTuneError, ArithmeticError):
    """Collocation matrix is numerically rank deficient."""

    def __init__(self, rank: int, cols: int):
        super().__init__(f"numerical rank {rank} < {cols} columns")
        self.rank = rank
        self.cols = cols


class UndefinedMetric(MfsTuneError, ArithmeticError):
    pass


class RegionInfeasible(MfsTuneError, RuntimeError):
    pass


class InsufficientData(MfsTuneError, ValueError):
    pass


class NumericalError(MfsTuneError, ArithmeticError):
    pass


class NoResult(MfsTuneError, LookupError):
    pass


class ConfigError(MfsTuneError, ValueError):
    pass


class ResumeIntegrityError(MfsTuneError, RuntimeError):
    pass
