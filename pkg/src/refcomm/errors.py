"""Exception hierarchy shared by all refcomm modules.

Exit-code mapping for the CLI lives in ``refcomm.cli``; library code only
raises these types.
"""


class RefcommError(Exception):
    """Base class for all refcomm errors."""


class ConfigError(RefcommError):
    """Invalid or inconsistent configuration (unknown keys, bad values)."""


class ShapeError(RefcommError):
    """Operand shapes do not match; message names both shapes."""


class ParameterError(RefcommError):
    """Invalid numeric parameter (e.g. non-positive temperature)."""


class DegenerateInputError(RefcommError):
    """Input is degenerate for the requested operation (e.g. zero-norm vector)."""


class NumericError(RefcommError):
    """Non-finite value encountered; message names the offending quantity."""


class InsufficientDataError(RefcommError):
    """Not enough records/ids to satisfy a request."""


class FormatError(RefcommError):
    """Malformed binary file; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvariantViolationError(RefcommError):
    """A run-level invariant was broken (e.g. frozen parameters changed)."""


class NotFittedError(RefcommError):
    """Estimator method requires a prior successful fit()."""
