"""Exception types shared across the package."""

from __future__ import annotations


class CacheNetError(Exception):
    """Base class for every error raised by cachenet."""


class ConfigInvalid(CacheNetError, ValueError):
    """A configuration failed validation.

    ``violations`` holds every problem found, not just the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  {v.kind}: {v.message}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s):\n{lines}")


class IndexOutOfRange(CacheNetError, IndexError):
    pass


class FileUncached(CacheNetError):
    """The requested file is cached by no tier, so no BS can serve it."""


class ZeroAssociationProbability(CacheNetError):
    """The user never associates with the requested tier for this file."""


class DomainError(CacheNetError, ValueError):
    pass


class UnequalAlphas(CacheNetError, ValueError):
    pass


class QuadratureError(CacheNetError, ArithmeticError):
    """Base for numerical integration failures; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoConvergence(QuadratureError):
    pass


class NonFiniteEvaluation(QuadratureError):
    pass


class DivergenceSuspected(QuadratureError):
    pass


class WindowTooSmall(CacheNetError):
    """Too many Monte Carlo realizations had no BS caching the file in the window.

    ``estimate`` is the estimate computed from the surviving realizations.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
