"""Exception hierarchy.

Grouped by how the CLI maps them to exit codes: usage (1), data (2),
numeric (3).
"""


class UdfwaveError(Exception):
    """Base class for all library errors."""


class InvalidParameter(UdfwaveError):
    """A parameter violates an operation's precondition."""


class ParseError(UdfwaveError):
    """A mesh file could not be parsed."""


class DegenerateGeometry(UdfwaveError):
    """Geometry has no usable extent (zero triangles, zero area, ...)."""


class FormatError(UdfwaveError):
    """A binary or text container has a bad magic, version or length."""


class IoError(UdfwaveError):
    """An underlying read/write failed."""


class ShapeMismatch(UdfwaveError):
    """Array shapes are inconsistent for the requested operation."""


class CountMismatch(UdfwaveError):
    """Point sets must have equal cardinality (exact matching distance)."""


class EmptyLevelSet(UdfwaveError):
    """The requested iso value is below the volume minimum everywhere."""


class NumericError(UdfwaveError):
    """A computation produced non-finite values or failed to converge."""


DATA_ERRORS = (
    ParseError,
    DegenerateGeometry,
    FormatError,
    IoError,
    ShapeMismatch,
    CountMismatch,
    EmptyLevelSet,
)
