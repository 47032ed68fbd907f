"""Exception hierarchy shared across the package.

``DataError`` covers everything wrong with on-disk inputs (stores, manifests,
catalogs); ``EncoderError`` covers failures of the query encoder boundary.
The CLI maps DataError to exit code 2 and other runtime failures to 3.
"""


class DataError(Exception):
    """A store, manifest, or catalog is missing, corrupt, or inconsistent."""


class NpyFormatError(DataError):
    """An array file does not conform to the supported NPY v1.0 subset."""


class ChecksumMismatchError(DataError):
    """A store file's content checksum does not match the manifest."""


class DimMismatchError(DataError):
    """Vector dimensions disagree between query, stores, or manifest."""


class EncoderError(Exception):
    """Base class for failures of an encoder adapter."""


class EncoderTimeoutError(EncoderError):
    """The remote encoder did not respond within the configured timeout."""


class EncoderHTTPError(EncoderError):
    """The remote encoder responded with a non-200 status."""


class EncoderResponseError(EncoderError):
    """The encoder response body was malformed or not decodable."""
