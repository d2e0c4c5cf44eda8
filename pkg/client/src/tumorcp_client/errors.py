"""Client-side error types."""


class ClientError(Exception):
    """Base class for feed-client errors."""


class VersionMismatch(ClientError):
    """The server speaks a protocol version other than 1."""


class ProtocolError(ClientError):
    """A frame was malformed, truncated, or unexpected."""
