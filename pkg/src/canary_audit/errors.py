"""Exception types for runtime (non-validation) failures.

Validation of caller-supplied arguments raises plain ValueError; these
classes mark failures that occur while a numerically valid experiment is
executing, and map to exit code 1 in the command-line front end.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for runtime failures of an audit or simulation."""


class DegenerateReleaseError(AuditError):
    """The released vector was exactly zero, so cosines are undefined."""


class AbortedRunError(AuditError):
    """Training produced a non-finite model; carries the offending round."""

    def __init__(self, round_index: int, message: str | None = None):
        self.round_index = round_index
        super().__init__(message or f"non-finite model parameters at round {round_index}")


class NoConvergenceError(AuditError):
    """An iterative search exhausted its budget without meeting tolerance."""


class DegenerateInputError(AuditError):
    """Input data admits no meaningful statistic (e.g. zero variance)."""
