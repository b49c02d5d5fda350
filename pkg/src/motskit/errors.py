"""Exception hierarchy shared across the toolkit.

Two failure classes matter to callers (and map to CLI exit codes):
format errors (unreadable input, exit 2) and constraint violations
(well-formed input breaking a semantic rule, exit 3).
"""

from __future__ import annotations


class MotsError(Exception):
    """Base class for all toolkit errors."""


class FormatError(MotsError):
    """Input could not be decoded: bad syntax, bad field, bad byte.

    ``path``, ``line`` and ``offset`` locate the problem when known.
    ``line`` is 1-based; ``offset`` is a 0-based byte offset within the
    offending token or stream.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if offset is not None:
            parts.append(f"byte offset {offset}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConstraintError(MotsError):
    """Well-formed input violates a semantic constraint.

    Examples: overlapping masks in one frame, duplicate (frame, id)
    pairs, empty object masks, mismatched image dimensions.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class UndefinedLossError(MotsError):
    """A loss has no valid terms (e.g. no anchor with both a positive
    and a negative)."""
