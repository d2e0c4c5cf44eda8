"""Thin streaming client for the tumorcp feed server."""

from .errors import ClientError, ProtocolError, VersionMismatch
from .session import ClientSession, connect

__version__ = "0.1.0"
__all__ = [
    "ClientError",
    "ClientSession",
    "ProtocolError",
    "VersionMismatch",
    "connect",
    "__version__",
]
