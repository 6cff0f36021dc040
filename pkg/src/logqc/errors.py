"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data/validation problems exit 2,
runtime failures exit 3.
"""


class LogQcError(Exception):
    """Base class for all errors raised by this package."""


class RuleSpecError(LogQcError):
    """A rule-spec file is malformed (syntax, duplicate name, bad pattern)."""


class DataError(LogQcError):
    """Input data violates a precondition (schema, labels, shapes)."""


class ConfigError(LogQcError):
    """An experiment configuration is invalid or incomplete."""


class FitError(LogQcError):
    """Model training failed or was handed unusable inputs."""


class PersistenceError(LogQcError):
    """A persisted artifact is corrupt, truncated, or of the wrong version."""
