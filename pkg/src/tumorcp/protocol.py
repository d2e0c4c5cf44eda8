"""Length-prefixed binary wire protocol for the feed server.

Frame layout (all integers little-endian)::

    magic   4 bytes  b"TCPF"
    version u16      protocol version, currently 1
    op      u16      operation code
    length  u64      payload byte count
    payload

Client ops: HELLO (empty), NEXT (epoch u64, sample_index u64, hint_len
u16, hint utf-8), SEED (u64), BYE (empty). Server ops: WELCOME (dataset
size u64), SAMPLE (meta_len u32, meta JSON, intensity f32 voxels in index
order, label u8 voxels), OK (empty), ERROR (code u16, message utf-8).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ProtocolError

MAGIC = b"TCPF"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
MAX_PAYLOAD = 1 << 32  # sanity bound against garbage length fields


class Op(IntEnum):
    HELLO = 1
    NEXT = 2
    SEED = 3
    BYE = 4
    WELCOME = 16
    SAMPLE = 17
    OK = 18
    ERROR = 19


class ErrorCode(IntEnum):
    MALFORMED = 1
    HANDSHAKE_REQUIRED = 2
    BAD_REQUEST = 3
    INTERNAL = 4


@dataclass(frozen=True)
class Frame:
    op: int
    payload: bytes = b""
    version: int = VERSION


@dataclass(frozen=True)
class FeedRequest:
    """A decoded NEXT request."""

    epoch: int
    sample_index: int
    case_hint: str | None = None


@dataclass
class FeedSample:
    """A decoded SAMPLE frame."""

    case_id: str
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    intensities: np.ndarray
    labels: np.ndarray
    record: dict


def encode_frame(frame: Frame) -> bytes:
    return HEADER.pack(MAGIC, frame.version, frame.op, len(frame.payload)) + frame.payload


def decode_frame(buf: bytes) -> tuple[Frame, int]:
    """Decode one frame from the head of ``buf``; returns (frame, bytes consumed)."""
    if len(buf) < HEADER.size:
        raise ProtocolError(f"short frame header: {len(buf)} bytes")
    magic, version, op, length = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    end = HEADER.size + length
    if len(buf) < end:
        raise ProtocolError(f"truncated payload: have {len(buf) - HEADER.size}, need {length}")
    return Frame(op=op, payload=bytes(buf[HEADER.size : end]), version=version), end


def read_frame(recv_exact) -> Frame:
    """Read one frame via a ``recv_exact(n) -> bytes`` callable."""
    head = recv_exact(HEADER.size)
    magic, version, op, length = HEADER.unpack(head)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    payload = recv_exact(length) if length else b""
    return Frame(op=op, payload=payload, version=version)


def pack_next(epoch: int, sample_index: int, case_hint: str | None = None) -> bytes:
    hint = (case_hint or "").encode("utf-8")
    return struct.pack("<QQH", epoch, sample_index, len(hint)) + hint


def unpack_next(payload: bytes) -> FeedRequest:
    if len(payload) < 18:
        raise ProtocolError(f"NEXT payload too short: {len(payload)} bytes")
    epoch, sample_index, hint_len = struct.unpack_from("<QQH", payload)
    if len(payload) != 18 + hint_len:
        raise ProtocolError("NEXT payload length does not match hint length")
    hint = payload[18:].decode("utf-8") if hint_len else None
    return FeedRequest(epoch=epoch, sample_index=sample_index, case_hint=hint)


def pack_seed(seed: int) -> bytes:
    return struct.pack("<Q", seed)


def unpack_seed(payload: bytes) -> int:
    if len(payload) != 8:
        raise ProtocolError(f"SEED payload must be 8 bytes, got {len(payload)}")
    return struct.unpack("<Q", payload)[0]


def pack_welcome(dataset_size: int) -> bytes:
    return struct.pack("<Q", dataset_size)


def unpack_welcome(payload: bytes) -> int:
    if len(payload) != 8:
        raise ProtocolError(f"WELCOME payload must be 8 bytes, got {len(payload)}")
    return struct.unpack("<Q", payload)[0]


def pack_error(code: int, message: str) -> bytes:
    return struct.pack("<H", code) + message.encode("utf-8")


def unpack_error(payload: bytes) -> tuple[int, str]:
    if len(payload) < 2:
        raise ProtocolError("ERROR payload too short")
    (code,) = struct.unpack_from("<H", payload)
    return code, payload[2:].decode("utf-8", errors="replace")


def pack_sample(
    case_id: str,
    dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    intensities: np.ndarray,
    labels: np.ndarray,
    record: dict,
) -> bytes:
    meta = json.dumps(
        {
            "case_id": case_id,
            "dims": list(dims),
            "spacing": list(spacing),
            "record": record,
        },
        sort_keys=True,
    ).encode("utf-8")
    ibytes = np.ascontiguousarray(intensities, dtype="<f4").tobytes(order="F")
    lbytes = np.ascontiguousarray(labels, dtype="<u1").tobytes(order="F")
    n = dims[0] * dims[1] * dims[2]
    if len(ibytes) != 4 * n or len(lbytes) != n:
        raise ValueError("payload sizes do not match dims")
    return struct.pack("<I", len(meta)) + meta + ibytes + lbytes


def unpack_sample(payload: bytes) -> FeedSample:
    if len(payload) < 4:
        raise ProtocolError("SAMPLE payload too short")
    (meta_len,) = struct.unpack_from("<I", payload)
    if len(payload) < 4 + meta_len:
        raise ProtocolError("SAMPLE metadata truncated")
    try:
        meta = json.loads(payload[4 : 4 + meta_len].decode("utf-8"))
        dims = tuple(int(v) for v in meta["dims"])
        spacing = tuple(float(v) for v in meta["spacing"])
        case_id = str(meta["case_id"])
        record = meta["record"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad SAMPLE metadata: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise ProtocolError(f"bad dims {dims}")
    n = dims[0] * dims[1] * dims[2]
    expected = 4 + meta_len + 5 * n
    if len(payload) != expected:
        raise ProtocolError(f"SAMPLE payload is {len(payload)} bytes, expected {expected}")
    off = 4 + meta_len
    intens = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(dims, order="F")
    labels = np.frombuffer(payload, dtype="<u1", count=n, offset=off + 4 * n).reshape(
        dims, order="F"
    )
    return FeedSample(
        case_id=case_id,
        dims=dims,
        spacing=spacing,
        intensities=np.ascontiguousarray(intens),
        labels=np.ascontiguousarray(labels),
        record=record,
    )
