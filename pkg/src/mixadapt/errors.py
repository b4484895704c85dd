"""Exception taxonomy.

Every error raised by this package derives from :class:`MixAdaptError`.
The split below matters operationally: ``InputError`` subclasses indicate
invalid configuration or malformed files (CLI exit code 2), while
``NumericalError`` subclasses indicate that a numerically degenerate case
was hit at runtime (CLI exit code 3).
"""


class MixAdaptError(Exception):
    """Base class for all package errors."""


class InputError(MixAdaptError):
    """Invalid configuration, parameters, or file contents."""


class NumericalError(MixAdaptError):
    """Degenerate numerical case hit while computing."""


# --- simplex / probability arithmetic ---------------------------------------

class AllZeroError(NumericalError):
    """Every entry of a vector that must carry mass is zero."""


class NegativeMassError(NumericalError):
    """An entry is negative beyond the clamping tolerance."""


class ZeroPriorError(NumericalError):
    """A prior entry is zero where positive mass must be re-weighted."""


class NotNormalizedError(InputError):
    """A probability vector's entries do not sum to 1 within tolerance."""


class DimensionMismatchError(InputError):
    """Array shapes or lengths are inconsistent."""


class EmptySetError(NumericalError):
    """A thresholding operation selected nothing."""


# --- synthetic domains -------------------------------------------------------

class ImpossibleEvidenceError(NumericalError):
    """The queried evidence has zero probability in the relevant domain."""


class InvalidParamError(InputError):
    """A generator or command parameter is out of range."""


# --- metrics -----------------------------------------------------------------

class LengthMismatchError(InputError):
    """Label/weight sequences have different lengths."""


class AllZeroWeightsError(InputError):
    """Sample weights are all zero."""


class EmptyMatrixError(InputError):
    """A confusion matrix carries no weight."""


class EmptyStreamError(InputError):
    """A posterior stream contained no samples."""


# --- tensor I/O ---------------------------------------------------------------

class TensorFormatError(InputError):
    """Base class for binary tensor file errors."""


class BadMagicError(TensorFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(TensorFormatError):
    """Header declares a format version this reader does not support."""


class TruncatedPayloadError(TensorFormatError):
    """Payload length does not match the header's dimensions."""


class DimOverflowError(TensorFormatError):
    """Product of header dimensions exceeds the format's 32-bit limit."""


class SchemaError(InputError):
    """Manifest JSON is malformed or missing required fields."""


class InvariantViolationError(InputError):
    """Manifest contents violate a declared invariant.

    The message names the offending field path, e.g. ``kappa[2]``.
    """


class MissingFileError(InputError):
    """A file referenced by a manifest or directory layout does not exist."""
