class FattError(Exception):
    """Base class for index file problems."""


class IndexFormatError(FattError):
    """The file is not a FATT index (bad magic or unsupported version)."""


class IndexCorruptError(FattError):
    """The file header is valid but the body is truncated or inconsistent."""
