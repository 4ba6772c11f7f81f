"""Exception types shared by the library and the CLI.

The CLI maps ``ConceptLensError`` subclasses to exit code 2 (validation)
and ``OSError`` to exit code 1 (I/O).
"""


class ConceptLensError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ConceptLensError):
    """Operands have incompatible or invalid dimensions."""


class ArgumentError(ConceptLensError):
    """An argument value is outside its documented domain."""


class ValidationError(ConceptLensError):
    """Data violates a construction invariant (non-finite values, bad labels, ...)."""


class ConvergenceError(ConceptLensError):
    """The eigensolver exhausted its iteration budget."""

    def __init__(self, message: str, pair_index: int | None = None):
        super().__init__(message)
        self.pair_index = pair_index


class RankDeficiencyError(ConceptLensError):
    """Observed rank cannot support the requested subspace dimension."""


class InsufficientVariationError(ConceptLensError):
    """A slice does not vary in enough styles to estimate a subspace."""


class DegenerateRangeError(ConceptLensError):
    """All coordinates are identical; histogram bin edges cannot be formed."""


class FormatError(ConceptLensError):
    """A manifest, spec, or config file violates its schema."""

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{message} (at {pointer!r})" if pointer else message)


class CorruptionError(ConceptLensError):
    """Blob bytes disagree with the manifest (length or digest)."""


class SpecError(ConceptLensError):
    """A synthetic model spec is missing entries required by a prompt grid."""
