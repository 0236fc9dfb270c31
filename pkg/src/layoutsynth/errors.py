"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
everything else raised from here exits 3.
"""


class LayoutSynthError(Exception):
    """Base class for all package errors."""


class InputError(LayoutSynthError, ValueError):
    """Malformed or inconsistent input data (bad shapes, ids, sizes)."""


class ConfigError(LayoutSynthError):
    """Invalid run configuration. Message names the offending field."""


class MissingClassError(InputError):
    """A declared class has no support in any provided mask."""

    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} is absent from every mask")
        self.class_id = class_id


class UnsupportedBackendError(LayoutSynthError):
    """Operation requested on a generator backend that cannot provide it."""


class OptimizationError(LayoutSynthError):
    """Latent optimization or training produced a non-finite loss."""


class UndefinedMetricError(LayoutSynthError):
    """Metric has no defined value on this input (e.g. empty matrix)."""

    def __init__(self, message: str, na_count: int | None = None):
        super().__init__(message)
        self.na_count = na_count


class ProvenanceError(ConfigError):
    """Artifact chain mismatch: checkpoint hashes do not line up."""
