"""Wire format: length-prefixed frames, little-endian throughout.

    frame    := u32 length, u8 type, payload      length = 1 + len(payload)
    HELLO    = 0x01   magic "RTBA", u16 version
    CONFIG   = 0x02   utf-8 "key = value" lines
    LOAD     = 0x03   u32 sample_index, u32 nbytes, bytes
    LOADED   = 0x04   u32 sample_index
    ISSUE    = 0x05   u64 query_id, u32 n, n x u32 sample indices
    COMPLETE = 0x06   u64 query_id, u32 blob length, blob
    FLUSH    = 0x07   empty
    BYE      = 0x08   empty

Frames are capped at 64 MiB. The session: the harness sends HELLO, we answer
HELLO, it sends CONFIG, then one LOAD per sample which we each answer with
LOADED, then pipelined ISSUEs which we answer with COMPLETEs in any order,
FLUSH answered once nothing is outstanding, and BYE answered before close.
"""

from __future__ import annotations

import socket
import struct

MAGIC = b"RTBA"
VERSION = 1
MAX_FRAME = 64 * 1024 * 1024

HELLO = 0x01
CONFIG = 0x02
LOAD = 0x03
LOADED = 0x04
ISSUE = 0x05
COMPLETE = 0x06
FLUSH = 0x07
BYE = 0x08


class WireError(RuntimeError):
    pass


def frame(kind: int, payload: bytes = b"") -> bytes:
    length = 1 + len(payload)
    if length > MAX_FRAME:
        raise WireError(f"frame of {length} bytes exceeds the {MAX_FRAME} byte cap")
    return struct.pack("<I", length) + bytes([kind]) + payload


def hello_frame() -> bytes:
    return frame(HELLO, MAGIC + struct.pack("<H", VERSION))


def loaded_frame(index: int) -> bytes:
    return frame(LOADED, struct.pack("<I", index))


def complete_frame(query_id: int, blob: bytes) -> bytes:
    return frame(COMPLETE, struct.pack("<QI", query_id, len(blob)) + blob)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        piece = sock.recv(n - len(buf))
        if not piece:
            raise WireError("connection closed mid-frame")
        buf.extend(piece)
    return bytes(buf)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Read one frame; returns (type, payload)."""
    (length,) = struct.unpack("<I", _recv_exact(sock, 4))
    if length < 1 or length > MAX_FRAME:
        raise WireError(f"frame length {length} outside [1, {MAX_FRAME}]")
    body = _recv_exact(sock, length)
    return body[0], body[1:]


def parse_hello(payload: bytes) -> int:
    if len(payload) != 6:
        raise WireError(f"HELLO payload must be 6 bytes; got {len(payload)}")
    if payload[:4] != MAGIC:
        raise WireError(f"bad HELLO magic {payload[:4]!r}")
    return struct.unpack("<H", payload[4:6])[0]


def parse_load(payload: bytes) -> tuple[int, bytes]:
    if len(payload) < 8:
        raise WireError("LOAD payload too short")
    index, nbytes = struct.unpack_from("<II", payload)
    data = payload[8:]
    if len(data) != nbytes:
        raise WireError(f"LOAD declares {nbytes} bytes but carries {len(data)}")
    return index, data


def parse_issue(payload: bytes) -> tuple[int, tuple[int, ...]]:
    if len(payload) < 12:
        raise WireError("ISSUE payload too short")
    query_id, n = struct.unpack_from("<QI", payload)
    if len(payload) != 12 + 4 * n:
        raise WireError(f"ISSUE payload must be {12 + 4 * n} bytes; got {len(payload)}")
    return query_id, struct.unpack_from(f"<{n}I", payload, 12)
