"""Exception taxonomy.

Everything raised on bad *input* derives from :class:`ValueError` so callers
can catch broadly; the concrete subclasses exist for callers (and the CLI)
that need to tell validation failures apart from computation failures.
"""

from __future__ import annotations


class ShapeError(ValueError):
    """An array has the wrong rank or incompatible dimensions."""


class NotFiniteError(ValueError):
    """An array contains NaN or infinity where finite values are required."""


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class UnsupportedSizeError(ValueError):
    """No known Hadamard construction exists for the requested size."""


class OrthogonalityError(ValueError):
    """A matrix that must be orthogonal is not, within tolerance."""


class ActdError(ValueError):
    """Base class for ACTD container parse/serialization failures."""


class BadMagicError(ActdError):
    """The source does not start with the ACTD magic."""


class UnsupportedVersionError(ActdError):
    """The container declares a version this reader does not speak."""


class TruncatedFileError(ActdError):
    """The source ended before the declared records were complete."""


class DuplicateRecordError(ActdError):
    """Two records in one container share a (name, kind) identity."""


class NonFinitePayloadError(ActdError):
    """A record payload contains NaN or infinity."""


class InvalidRecordError(ActdError):
    """A record header is malformed (bad codes, bad names, bad shapes)."""
