"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2, OSError -> 3,
NumericalError -> 5, and every other EditGrowthError -> 4.
"""


class EditGrowthError(Exception):
    """Base class for all package errors."""


class ConfigError(EditGrowthError):
    """Bad run configuration: unknown key, wrong type, out-of-domain value."""


class DataError(EditGrowthError):
    """Input data cannot be processed as requested."""


class DomainError(DataError):
    """Argument or parameter outside its mathematical domain."""


class DegenerateCorpusError(DomainError):
    """Corpus specification too short to simulate a single step."""


class FormatError(DataError):
    """Structurally invalid input file (e.g. missing header)."""


class CorruptInputError(DataError):
    """Malformed-line ratio above the tolerated cutoff."""


class NoSlicesError(DataError):
    """Too few articles to build even one time slice."""


class DegenerateFitError(DataError):
    """Slice has zero log-count variance; the fitted model is a point mass."""


class InsufficientDataError(DataError):
    """Not enough usable observations for the requested estimate."""


class InsufficientTailError(DataError):
    """No sample values at or above the tail cutoff."""


class LabelingError(DataError):
    """Article labeling is missing, inconsistent, or malformed."""


class NormalizationError(DataError):
    """Age-normalized score undefined for this article."""


class NumericalError(EditGrowthError):
    """A numerical routine failed to converge; message carries diagnostics."""
