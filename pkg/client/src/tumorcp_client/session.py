"""Blocking feed-server session for training loops.

Pure transport: no augmentation, normalization, or reordering happens
client side, so identical (epoch, sample_index) requests always return
element-wise identical arrays.
"""

from __future__ import annotations

import socket

import numpy as np

from . import wire
from .errors import ProtocolError, VersionMismatch


class ClientSession:
    """One connection to a feed server."""

    def __init__(self, sock: socket.socket, endpoint: str, dataset_size: int):
        self._sock = sock
        self.endpoint = endpoint
        self.version = wire.VERSION
        self.dataset_size = dataset_size
        self.epoch = 0

    # -- transport -----------------------------------------------------------

    def _recv_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(min(1 << 20, n - len(buf)))
            if not chunk:
                raise ProtocolError("connection closed mid-frame")
            buf += chunk
        return buf

    def _rpc(self, op: int, payload: bytes = b"") -> tuple[int, bytes]:
        self._sock.sendall(wire.encode(op, payload))
        version, got_op, got_payload = wire.read_frame(self._recv_exact)
        if version != wire.VERSION:
            raise VersionMismatch(f"server answered with protocol version {version}")
        if got_op == wire.OP_ERROR:
            code, message = wire.parse_error(got_payload)
            raise ProtocolError(f"server error {code}: {message}")
        return got_op, got_payload

    # -- api -----------------------------------------------------------------

    def next_sample(
        self, epoch: int, sample_index: int, case_hint: str | None = None
    ) -> tuple[np.ndarray, np.ndarray, dict]:
        """Fetch one sample; returns (float32 array, uint8 array, record)."""
        op, payload = self._rpc(wire.OP_NEXT, wire.next_payload(epoch, sample_index, case_hint))
        if op != wire.OP_SAMPLE:
            raise ProtocolError(f"expected SAMPLE, got op {op}")
        self.epoch = epoch
        return wire.parse_sample(payload)

    def set_seed(self, seed: int) -> None:
        """Re-seed this session's sample stream."""
        op, _ = self._rpc(wire.OP_SEED, wire.seed_payload(seed))
        if op != wire.OP_OK:
            raise ProtocolError(f"expected OK, got op {op}")

    def iter_epoch(self, epoch: int, samples_per_epoch: int):
        """Yield exactly ``samples_per_epoch`` (intensity, label, record)
        tuples for sequential indices of one epoch."""
        for i in range(samples_per_epoch):
            yield self.next_sample(epoch, i)

    def close(self) -> None:
        try:
            self._rpc(wire.OP_BYE)
        except (OSError, ProtocolError):
            pass
        finally:
            self._sock.close()

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(endpoint: str, timeout: float = 60.0) -> ClientSession:
    """Open a session: TCP ``host:port`` or a unix socket path.

    Raises ConnectionError when the endpoint is unreachable and
    VersionMismatch when the server speaks a version other than 1.
    """
    if "/" in endpoint:
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.settimeout(timeout)
        sock.connect(endpoint)
    else:
        host, _, port = endpoint.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
    try:
        sock.sendall(wire.encode(wire.OP_HELLO))

        def recv_exact(n: int) -> bytes:
            buf = b""
            while len(buf) < n:
                chunk = sock.recv(n - len(buf))
                if not chunk:
                    raise ProtocolError("connection closed during handshake")
                buf += chunk
            return buf

        version, op, payload = wire.read_frame(recv_exact)
        if version != wire.VERSION:
            raise VersionMismatch(f"server speaks protocol version {version}, need 1")
        if op != wire.OP_WELCOME:
            raise ProtocolError(f"expected WELCOME, got op {op}")
        size = wire.parse_welcome(payload)
    except BaseException:
        sock.close()
        raise
    return ClientSession(sock, endpoint, size)
