"""Exception hierarchy shared by every layer of the package."""


class PendulumError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSizeError(PendulumError, ValueError):
    """Register size outside the supported range."""


class ArityError(PendulumError, ValueError):
    """Operation called on a register with the wrong number of qubits."""


class DimensionError(PendulumError, ValueError):
    """Two objects that must share a dimension do not."""


class QubitIndexError(PendulumError, IndexError):
    """A qubit or pendulum index lies outside the register."""


class ScheduleError(PendulumError, ValueError):
    """A control segment or schedule violates its structural invariants."""


class NumericalGuardError(PendulumError, ArithmeticError):
    """A numerical safety guard tripped (step too coarse, zero-energy branch...)."""
