"""Exception types raised across the package.

Two families matter to callers: ``DegeneracyError`` subclasses signal that the
statistics of the data are unusable (rank-deficient, too few samples), while
everything else under ``GdakitError`` signals malformed input.
"""


class GdakitError(Exception):
    """Base class for all errors raised by gdakit."""


class MalformedHeader(GdakitError):
    """File is not a well-formed NPY v1.0 array of the expected layout."""


class DTypeMismatch(GdakitError):
    """NPY payload dtype differs from the documented on-disk dtype."""


class IoFailure(GdakitError):
    """Underlying OS-level read or write failed."""


class ZeroRow(GdakitError):
    """A feature row has (near-)zero Euclidean norm and cannot be normalized."""


class EmptyClass(GdakitError):
    """A class index in [0, K) has no samples."""

    def __init__(self, class_index: int):
        self.class_index = class_index
        super().__init__(f"class {class_index} has no samples")


class DimensionMismatch(GdakitError):
    """Operands disagree on feature dimension or class count."""


class LengthMismatch(GdakitError):
    """Paired vectors have different lengths."""


class DegeneracyError(GdakitError):
    """Base class for numerically degenerate statistics."""


class TooFewSamples(DegeneracyError):
    """Not enough samples to estimate the requested statistic."""


class DegenerateCovariance(DegeneracyError):
    """Covariance estimate has (near-)zero trace; no usable precision exists."""
