from __future__ import annotations


class TenslinkError(Exception):
    """Base class for every error raised by tenslink."""


class ValidationError(TenslinkError, ValueError):
    """Precondition violated: bad shapes, ranks, penalties or parameters."""


class TensorIOError(TenslinkError):
    """Malformed, truncated or unreadable tensor/model file."""

    def __init__(self, message: str, *, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConvergenceError(TenslinkError):
    """A fit degenerated or could not produce a usable model."""


class IdentifiabilityError(ConvergenceError):
    """Sources cannot be separated from the available statistics."""
