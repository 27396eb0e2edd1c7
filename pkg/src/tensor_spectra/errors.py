"""Exception hierarchy shared by all modules."""


class TensorSpectraError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(TensorSpectraError, ValueError):
    pass


class InvalidDimensionError(InvalidArgumentError):
    pass


class CapacityError(InvalidArgumentError):
    pass


class NumericalError(TensorSpectraError, ArithmeticError):
    """Base for failures of a numerical routine (exit code 2 in the CLI)."""


class DegenerateSampleError(NumericalError):
    """A Ginibre draw was numerically rank deficient; the caller should redraw."""


class NumericalFailureError(NumericalError):
    """An iterative routine exhausted its budget."""


class ConsistencyError(NumericalError):
    """A computed quantity violated a certified invariant."""
