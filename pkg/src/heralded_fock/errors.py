"""Exception types shared across the package.

Parameter-range violations raise plain ValueError; the classes here mark
conditions that callers may want to handle differently (distinct CLI exit
codes, per-cell error flags in parameter sweeps).
"""


class NumericalAccuracyError(ArithmeticError):
    """A computed value fell outside its guaranteed accuracy envelope.

    Raised instead of silently returning a number that cancellation or
    underflow has rendered meaningless.
    """


class InfeasibleEventError(RuntimeError):
    """The heralding event has probability below the machine floor."""


class InsufficientStatisticsError(RuntimeError):
    """A Monte-Carlo run kept too few trials to estimate anything.

    Carries the observed acceptance rate so the caller can size a rerun.
    """

    def __init__(self, message: str, acceptance_rate: float = 0.0):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class UndefinedQError(ValueError):
    """Mandel Q is undefined because the conditional mean vanishes."""


class ThresholdNotFoundError(LookupError):
    """No grid cell satisfies the rate/sub-Poissonian threshold query."""
