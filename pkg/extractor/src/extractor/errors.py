class ExtractorError(Exception):
    """Base class for extraction failures."""


class DatasetMissing(ExtractorError):
    """The requested dataset directory or split has no usable images."""


class EncoderLoadError(ExtractorError):
    """The requested encoder backend could not be constructed."""


class BadTemplate(ExtractorError):
    """A prompt template does not contain exactly one '{class}' placeholder."""
