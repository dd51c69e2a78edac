"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SbsError(Exception):
    """Base class for every error raised by this package."""


class DivisorPole(SbsError):
    """Evaluation on, or numerically too near, the zero divisor."""


class IllConditioned(SbsError):
    """Root polishing did not converge."""


class DegenerateCritical(SbsError):
    """A critical point of the potential is not Morse."""


class NearDiscriminant(SbsError):
    """The section has (numerically) multiple zeros."""


class SkeletonIncomplete(SbsError):
    """A separatrix launched from a saddle did not resolve."""


class ResolutionTooCoarse(SbsError):
    """Loop quadrature disagrees between N and N/2 samples."""


class AmbiguousWinding(SbsError):
    """Winding number could not be rounded to an integer reliably."""


class SelfIntersecting(SbsError):
    """A loop crosses itself at sample resolution."""


class NoExactRadius(SbsError):
    """No exact member found in the searched loop family.

    ``bracket`` holds the data of the failed search: the radius interval
    and the action values at its ends.
    """

    def __init__(self, message: str, bracket: dict | None = None):
        super().__init__(message)
        self.bracket = bracket or {}


class InvalidPath(SbsError):
    """A coefficient path step violates the discriminant margin."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class ContinuationBroken(SbsError):
    """Root matching along a path is ambiguous even after refinement."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class NoSignChange(SbsError):
    """The ray never approaches the discriminant inside the search bracket."""
