"""Exception hierarchy shared by all modules."""


class FptError(Exception):
    """Base class for library errors."""


class ValidationError(FptError, ValueError):
    """Input violates a structural invariant (bad rates, bad law, bad partition)."""


class ConvergenceError(FptError, RuntimeError):
    """A numerical procedure did not reach its accuracy target."""


class CensoringError(FptError, RuntimeError):
    """Monte Carlo trajectories hit the event or population cap."""

    def __init__(self, message, censored=0):
        super().__init__(message)
        self.censored = censored
