"""Exception types shared across the package.

Everything raised on purpose derives from :class:`SdeverseError` so callers
can catch one base class at the harness boundary.
"""

from __future__ import annotations


class SdeverseError(Exception):
    """Base class for all package-specific failures."""


class InvalidParameter(SdeverseError):
    """A spec or config field is outside its permitted range."""


class InvalidLevel(SdeverseError):
    """Complexity level outside the supported 0..7 range."""


class DimensionMismatch(SdeverseError):
    """Array shapes disagree with the owning spec."""


class NotPositiveDefinite(SdeverseError):
    """A matrix that must be positive definite is not, even after repair."""


class NonFiniteState(SdeverseError):
    """Simulation produced NaN/inf or left the clamp region.

    Carries enough context (system id, path, step) to reproduce the blow-up.
    """

    def __init__(self, message: str, *, step: int | None = None,
                 path: int | None = None, system_id: str | None = None):
        super().__init__(message)
        self.step = step
        self.path = path
        self.system_id = system_id


class DegenerateHistory(SdeverseError):
    """A fitted series is constant or too short for the estimator."""


class FitFailed(SdeverseError):
    """An optimizer could not produce usable parameters."""


class FormatError(SdeverseError):
    """Malformed bytes in a serialized stream; names the byte offset."""

    def __init__(self, message: str, *, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
