"""Exception types shared across the package.

CLI exit-code mapping: ConfigError -> 1, data/format/alignment errors -> 2,
NumericDivergenceError -> 3.
"""


class DriftlabError(Exception):
    """Base class for all package errors."""


class ConfigError(DriftlabError):
    """Invalid configuration or usage (exit code 1)."""


class DataFormatError(DriftlabError):
    """Malformed input file or on-disk artifact (exit code 2)."""


class AlignmentError(DataFormatError):
    """Vocabulary alignment failed (empty intersection, dim mismatch)."""


class DegenerateRowError(DataFormatError):
    """An embedding row has (near-)zero norm where a direction is required."""


class NumericDivergenceError(DriftlabError):
    """NaN/Inf appeared in parameters or gradients (exit code 3)."""


class GraphReuseError(DriftlabError):
    """A recorded computation graph was backpropagated more than once."""
