from __future__ import annotations


class BerisError(Exception):
    """Base class for all library errors."""


class DomainError(BerisError, ValueError):
    """Input outside the domain where an operation is defined."""


class DegenerateInputError(BerisError, ValueError):
    """Input sits on a degenerate configuration (e.g. repeated leading eigenvalue)."""


class DegenerateFlowError(BerisError, ValueError):
    """Flow has no isolated stagnation points."""


class DivergenceError(BerisError, RuntimeError):
    """A time integration produced non-finite values.

    ``time`` is the simulation time of the last finite state and ``step`` the
    index of the failing step, when known.
    """

    def __init__(self, message: str, time: float | None = None, step: int | None = None):
        super().__init__(message)
        self.time = time
        self.step = step


class SnapshotError(BerisError):
    """Malformed snapshot file."""


class SnapshotSizeError(SnapshotError):
    pass


class SnapshotMagicError(SnapshotError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class ConfigError(BerisError):
    """Run configuration could not be parsed (CLI exit code 2)."""


class ValidationError(BerisError):
    """Run configuration parsed but violates a parameter constraint (CLI exit code 3)."""
