"""Exception hierarchy shared by all modules."""


class Oldroyd1DError(Exception):
    """Base class for every error raised by this package."""


class DomainError(Oldroyd1DError, ValueError):
    """An argument lies outside the domain of a model function."""


class ValidationError(Oldroyd1DError, ValueError):
    """A configuration value or call precondition is invalid.

    ``key`` carries the dotted config path when the error comes from a config.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class AdmissibilityError(Oldroyd1DError, ValueError):
    """A state violates ``v > 0`` or ``2*tau*a*S + mu > 0``."""

    def __init__(self, message, invariant, index=None):
        self.invariant = invariant
        self.index = index
        super().__init__(message)


class BreakdownError(Oldroyd1DError, RuntimeError):
    """The solution lost admissibility (or finiteness) during a run."""

    def __init__(self, message, invariant, time=None, index=None, stage=None):
        self.invariant = invariant
        self.time = time
        self.index = index
        self.stage = stage
        super().__init__(message)

    def with_stage(self, stage, time=None):
        """Return a copy labelled with the failing stage (and time)."""
        t = self.time if time is None else time
        msg = f"{self.invariant} violated at cell {self.index}, t={t!r}, stage={stage}"
        return type(self)(msg, self.invariant, time=t, index=self.index, stage=stage)

    def record(self):
        return {
            "invariant": self.invariant,
            "time": None if self.time is None else float(self.time),
            "index": None if self.index is None else int(self.index),
            "stage": self.stage,
        }


class NonFiniteError(BreakdownError):
    """NaN or Inf appeared in a field."""


class InternalConsistencyError(Oldroyd1DError, RuntimeError):
    """Something that should be impossible for admissible input happened."""
