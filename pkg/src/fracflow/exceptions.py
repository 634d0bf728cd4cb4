"""Exception hierarchy shared by all fracflow modules."""


class FracflowError(Exception):
    """Base class for all errors raised by fracflow."""


class ShapeMismatchError(FracflowError, ValueError):
    """Two fields (or a field and a plan) disagree on grid dimensions."""


class NegativeResistanceError(FracflowError, ValueError):
    """A crack-resistance field contains negative entries."""


class NonFiniteFieldError(FracflowError, ValueError):
    """An input field contains NaN or infinite entries."""


class DivergenceError(FracflowError, FloatingPointError):
    """The iteration produced non-finite values.

    Attributes
    ----------
    iteration : int
        Index of the iteration at which the blow-up was detected.
    """

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration


class VoxelFormatError(FracflowError, ValueError):
    """An FFVX file is malformed, truncated or of an unexpected kind."""


class JammingError(FracflowError, RuntimeError):
    """Random sequential adsorption could not place further spheres."""


class MissingPhaseError(FracflowError, ValueError):
    """A phase id present in a map has no entry in the gamma table."""
