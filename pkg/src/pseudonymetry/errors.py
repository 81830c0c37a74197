"""Exception classes shared across the package."""


class PseudonymetryError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PseudonymetryError, ValueError):
    """A configuration value violates its documented constraints."""


class FramingError(PseudonymetryError, ValueError):
    """A packet or bit sequence does not match the configured framing."""


class InsufficientDataError(PseudonymetryError, ValueError):
    """An input series is too short for the requested operation."""


class DatasetIOError(PseudonymetryError):
    """Base class for spectrogram file errors."""


class SpectrogramFormatError(DatasetIOError):
    """File is not a spectrogram file of a supported version."""


class SpectrogramCorruptionError(DatasetIOError):
    """File header and payload disagree (truncated or trailing bytes)."""
