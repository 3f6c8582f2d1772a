"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, everything else
derived from WhilterError -> 1.
"""


class WhilterError(Exception):
    """Base class for all package errors."""


class ConfigError(WhilterError):
    """Invalid configuration value or inconsistent option combination."""


class DataError(WhilterError):
    """Invalid or unreadable input data."""


class AudioError(DataError):
    """Unreadable or unsupported audio input."""


class ManifestError(DataError):
    """Malformed manifest or annotation export."""


class FeatureFileError(DataError):
    """Malformed feature file."""


class BadMagicError(FeatureFileError):
    """Feature file does not start with the expected magic bytes."""


class UnsupportedVersionError(FeatureFileError):
    """Feature file carries a format version this build does not read."""


class DtypeCodeError(FeatureFileError):
    """Feature file payload dtype is unknown or unimplemented."""


class PayloadSizeError(FeatureFileError):
    """Feature file payload shorter or longer than the header promises."""


class NonFiniteError(WhilterError):
    """A NaN or Inf appeared where a finite value is required."""
