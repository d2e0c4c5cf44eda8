"""Feed-server wire format, client side.

Independent implementation against the published frame layout: magic
``TCPF``, version u16, op u16, payload length u64 (all little-endian),
then the payload. SAMPLE payloads carry a JSON metadata block followed by
raw float32 intensities and uint8 labels, voxels in index order
(x fastest).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ProtocolError

MAGIC = b"TCPF"
VERSION = 1
_HEADER = struct.Struct("<4sHHQ")
_MAX_PAYLOAD = 1 << 32

OP_HELLO = 1
OP_NEXT = 2
OP_SEED = 3
OP_BYE = 4
OP_WELCOME = 16
OP_SAMPLE = 17
OP_OK = 18
OP_ERROR = 19


def encode(op: int, payload: bytes = b"", version: int = VERSION) -> bytes:
    return _HEADER.pack(MAGIC, version, op, len(payload)) + payload


def read_frame(recv_exact) -> tuple[int, int, bytes]:
    """Read one frame; returns (version, op, payload)."""
    head = recv_exact(_HEADER.size)
    magic, version, op, length = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if length > _MAX_PAYLOAD:
        raise ProtocolError(f"unreasonable payload length {length}")
    payload = recv_exact(length) if length else b""
    return version, op, payload


def next_payload(epoch: int, sample_index: int, case_hint: str | None = None) -> bytes:
    hint = (case_hint or "").encode("utf-8")
    return struct.pack("<QQH", epoch, sample_index, len(hint)) + hint


def seed_payload(seed: int) -> bytes:
    return struct.pack("<Q", seed)


def parse_welcome(payload: bytes) -> int:
    if len(payload) != 8:
        raise ProtocolError(f"WELCOME payload must be 8 bytes, got {len(payload)}")
    return struct.unpack("<Q", payload)[0]


def parse_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < 2:
        raise ProtocolError("ERROR payload too short")
    (code,) = struct.unpack_from("<H", payload)
    return code, payload[2:].decode("utf-8", errors="replace")


def parse_sample(payload: bytes) -> tuple[np.ndarray, np.ndarray, dict]:
    """Decode a SAMPLE payload into (intensities, labels, record).

    Arrays are reshaped to the advertised dims with no scaling or
    reordering: their bytes equal the wire payload slices exactly.
    """
    if len(payload) < 4:
        raise ProtocolError("SAMPLE payload too short")
    (meta_len,) = struct.unpack_from("<I", payload)
    if len(payload) < 4 + meta_len:
        raise ProtocolError("SAMPLE metadata truncated")
    try:
        meta = json.loads(payload[4 : 4 + meta_len].decode("utf-8"))
        dims = tuple(int(v) for v in meta["dims"])
        record = meta["record"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad SAMPLE metadata: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise ProtocolError(f"bad dims {dims}")
    n = dims[0] * dims[1] * dims[2]
    if len(payload) != 4 + meta_len + 5 * n:
        raise ProtocolError(
            f"SAMPLE payload is {len(payload)} bytes, expected {4 + meta_len + 5 * n}"
        )
    off = 4 + meta_len
    intensities = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(
        dims, order="F"
    )
    labels = np.frombuffer(payload, dtype="<u1", count=n, offset=off + 4 * n).reshape(
        dims, order="F"
    )
    return np.ascontiguousarray(intensities), np.ascontiguousarray(labels), record
