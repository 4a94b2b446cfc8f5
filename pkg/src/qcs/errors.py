"""Exception hierarchy shared across the package."""


class QCSError(Exception):
    """Base class for all errors raised by :mod:`qcs`."""


class InvalidParameter(QCSError, ValueError):
    """A parameter lies outside its admissible domain."""


class InfeasibleWindow(QCSError, ValueError):
    """The request can never complete: ``w * m < n`` for a finite window."""


class Overloaded(QCSError):
    """The queue has load ``rho >= 1`` and no steady state exists."""

    def __init__(self, rho: float, message: str | None = None):
        self.rho = rho
        super().__init__(message or f"system overloaded (rho={rho:.6g} >= 1)")


class Unsupported(QCSError):
    """No closed form is available for the requested window problem."""


class StateSpaceTooLarge(QCSError):
    """The Markov-chain oracle would need too many states."""


class SamplerOverrun(QCSError):
    """A window-problem draw exceeded the defensive batch cap."""


class NonConvergence(QCSError):
    """An iterative solver did not reach its tolerance."""


class InvalidConfig(QCSError, ValueError):
    """A simulation or sweep configuration is malformed."""
