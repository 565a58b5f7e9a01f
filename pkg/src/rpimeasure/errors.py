"""Exception and warning types raised across the package."""


class RPIError(Exception):
    """Base class for all errors raised by rpimeasure."""


class InvalidDimensionError(RPIError, ValueError):
    pass


class NonpositiveParameterError(RPIError, ValueError):
    pass


class DimensionMismatchError(RPIError, ValueError):
    pass


class InvalidIndexError(RPIError, IndexError):
    pass


class TruncationError(RPIError, ValueError):
    """Fock truncation discards more population than allowed."""


class InvalidStateError(RPIError, ValueError):
    """Matrix fails the density-matrix invariants (trace, Hermiticity, positivity)."""


class OverdampedError(RPIError, ValueError):
    """Shifted frequency is imaginary (lambda >= 2)."""


class NoDampingError(RPIError, ValueError):
    """No steady state exists without friction (lambda == 0)."""


class NoEquilibriumError(RPIError, ValueError):
    """lambda <= 4*hbar*kappa: no temperature reproduces this disturbance strength."""


class StepSizeError(RPIError, ValueError):
    pass


class DimensionCapError(RPIError, ValueError):
    pass


class DegenerateKernelError(RPIError, RuntimeError):
    pass


class ConvergenceError(RPIError, RuntimeError):
    pass


class PositivityError(RPIError, RuntimeError):
    pass


class ImaginaryExpectationError(RPIError, ValueError):
    pass


class NormUnderflowError(RPIError, RuntimeError):
    pass


class TruncationWarning(UserWarning):
    """Population in the top Fock levels exceeds the leak threshold."""


class PositivityWarning(UserWarning):
    pass
