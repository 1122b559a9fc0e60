"""Exception types shared across the package.

Plain ``ValueError`` is used for bad arguments throughout; the classes here
cover failure modes that callers may want to catch separately (data-file
problems, numerically unrecoverable solves, optional data that is simply
not present on this machine).
"""


class CorruptDataError(RuntimeError):
    """A data payload is missing, truncated, or inconsistent with its manifest."""


class InvalidManifestError(ValueError):
    """A manifest or montage description references things that do not exist."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond what regularization can rescue."""


class DataUnavailableError(RuntimeError):
    """An optional external dataset is absent; callers should degrade gracefully."""
