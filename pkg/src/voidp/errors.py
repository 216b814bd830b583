"""Typed exceptions shared across the toolkit."""


class VoidpError(Exception):
    """Base class for all toolkit errors."""


class ZeroEvidenceError(VoidpError, ValueError):
    """Raised when supplied evidence has probability zero under the model."""


class StateDependentCostError(VoidpError, ValueError):
    """Raised when state-dependent costs reach an open-loop (subset) solver."""


class EnumerationCapError(VoidpError, ValueError):
    """Raised when an exhaustive oracle would exceed its hard size cap."""


class SchemaError(VoidpError, ValueError):
    """Raised on malformed persisted documents.

    Carries the path of the offending field, e.g. ``transitions[1][0]``.
    """

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{message} (at {path})" if path else message)


class FormatVersionError(SchemaError):
    """Raised when a persisted document declares an unsupported format tag."""
