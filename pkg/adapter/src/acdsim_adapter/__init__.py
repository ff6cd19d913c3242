"""Thin reset/step client for the acdsim newline-delimited JSON protocol.

The adapter holds zero environment logic: every value it returns is decoded
verbatim from the server's messages, so any language binding built the same
way behaves identically.
"""

from .client import (
    ProtocolError,
    RemoteEnvClient,
    StdioTransport,
    TcpTransport,
)

__all__ = ["ProtocolError", "RemoteEnvClient", "StdioTransport", "TcpTransport"]
