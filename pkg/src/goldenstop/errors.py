"""Exception hierarchy.

Domain violations (bad inputs, wrong parameter ranges) are ValueError
subclasses; numerical failures (divergence, scheme breakdown, broken
invariants) are RuntimeError subclasses.  The CLI maps the former to exit
code 2 and the latter to exit code 3.
"""

from __future__ import annotations


class GoldenstopError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GoldenstopError, ValueError):
    """Input outside the documented domain (nonpositive state, bad ordering,
    invalid dimension, malformed rule parameters)."""


class UnsupportedModelError(GoldenstopError, ValueError):
    """Operation needs a model feature this model does not provide
    (e.g. a scale inverse for a table-based custom model)."""


class NumericalError(GoldenstopError, RuntimeError):
    """Numerical procedure failed to produce a trustworthy result."""


class SingularPointError(NumericalError):
    """Boundary ODE right-hand side evaluated on the sign-change curve,
    where the expression is 0/0."""


class DivergenceError(NumericalError):
    """A shot of the boundary ODE blew up before reaching the requested
    abscissa."""

    def __init__(self, message: str, blow_up_at: float | None = None):
        super().__init__(message)
        self.blow_up_at = blow_up_at


class NoMinimalSolutionError(NumericalError):
    """Every shot diverged: no minimal solution of the boundary ODE exists
    on the requested interval."""

    def __init__(self, message: str, blow_up_points: list[float] | None = None):
        super().__init__(message)
        self.blow_up_points = blow_up_points or []


class ConsistencyError(NumericalError):
    """An internal invariant failed (non-monotone shot family, boundary
    below the sign curve, non-increasing grid)."""


class SchemeError(NumericalError):
    """Discretisation scheme produced an invalid state (nonpositive
    coordinate outside the guarded region)."""


class CheckFailure(GoldenstopError):
    """A statistical validation check came out outside tolerance.
    Mapped to CLI exit code 4."""
