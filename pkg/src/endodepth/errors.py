"""Shared exception types."""


class EmptySupportError(ValueError):
    """Raised when a masked reduction has no valid pixels to average over."""


class SceneCoverageError(ValueError):
    """Raised when a camera ray fails to hit the synthetic surface."""
