"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI lives in :mod:`irdrop.cli`: input problems
(validation, parsing, configuration) map to exit code 2, numeric failures
(solver divergence, NaN during training) to exit code 3.
"""


class IRDropError(Exception):
    """Base class for all package errors."""


class ValidationError(IRDropError):
    """An invariant on a domain object does not hold."""


class ParseError(IRDropError):
    """A file could not be parsed; message carries the line number."""


class FormatError(IRDropError):
    """A binary payload or header is malformed or inconsistent."""


class ConfigError(IRDropError):
    """A configuration value is missing or unusable."""


class ShapeError(IRDropError):
    """Tensor or grid dimensions do not agree."""


class SolverError(IRDropError):
    """An iterative solve or a training run failed numerically."""


class UndefinedMetricError(IRDropError):
    """A metric has no defined value on the given data (e.g. one class only)."""
