"""The .rdv container: fixed 22-byte header followed by per-frame payloads.

Header (little-endian)::

    offset size field
    0      4    magic "RDV1"
    4      1    version (1)
    5      2    width   (original, before downsampling)
    7      2    height
    9      4    frame_count
    13     2    fps_num
    15     2    fps_den
    17     2    intra_period
    19     1    gop_size
    20     1    quality_index (1..8)
    21     1    downsample_flag (0/1)

Each frame payload, in coding order::

    u32 coding_order_index, u32 byte_length, byte_length bytes
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import List, Tuple

from .errors import ConfigError, IoError, ParseError, TruncationError, VersionError

MAGIC = b"RDV1"
VERSION = 1
HEADER = struct.Struct("<4sBHHIHHHBBB")
FRAME_HEADER = struct.Struct("<II")
assert HEADER.size == 22


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    frame_count: int
    fps_num: int
    fps_den: int
    intra_period: int
    gop_size: int
    quality_index: int
    downsample: bool = False
    version: int = VERSION
    magic: bytes = MAGIC

    def validate(self):
        if self.magic != MAGIC:
            raise ParseError(f"bad magic {self.magic!r}")
        if self.version != VERSION:
            raise VersionError(f"unsupported version {self.version}")
        if not 1 <= self.quality_index <= 8:
            raise ParseError(f"quality_index {self.quality_index} outside 1..8")
        if self.gop_size < 1 or self.intra_period < 1 or self.gop_size > self.intra_period:
            raise ParseError(f"gop_size {self.gop_size} / intra_period {self.intra_period} invalid")
        if self.width < 1 or self.height < 1 or self.fps_num < 1 or self.fps_den < 1:
            raise ParseError("zero geometry or frame rate in header")

    def pack(self):
        try:
            return HEADER.pack(
                self.magic, self.version, self.width, self.height, self.frame_count,
                self.fps_num, self.fps_den, self.intra_period, self.gop_size,
                self.quality_index, int(self.downsample),
            )
        except struct.error as exc:
            raise ConfigError(f"header field out of range: {exc}") from exc

    @classmethod
    def unpack(cls, data):
        (magic, version, w, h, n, fn, fd, ip, gop, q, ds) = HEADER.unpack(data)
        return cls(w, h, n, fn, fd, ip, gop, q, bool(ds), version, magic)


@dataclass(frozen=True)
class FramePayload:
    coding_order_index: int
    data: bytes

    @property
    def byte_length(self):
        return len(self.data)


def serialize(header: StreamHeader, payloads: List[FramePayload]) -> bytes:
    header.validate()
    if len(payloads) != header.frame_count:
        raise ConfigError(f"{len(payloads)} payloads for frame_count {header.frame_count}")
    parts = [header.pack()]
    for i, p in enumerate(payloads):
        if p.coding_order_index != i:
            raise ConfigError(f"payload {i} carries coding order {p.coding_order_index}")
        parts.append(FRAME_HEADER.pack(p.coding_order_index, len(p.data)))
        parts.append(bytes(p.data))
    return b"".join(parts)


def deserialize(data: bytes) -> Tuple[StreamHeader, List[FramePayload]]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise ParseError("not an RDV1 stream")
    if len(data) < HEADER.size:
        raise TruncationError("stream shorter than its header")
    header = StreamHeader.unpack(data[:HEADER.size])
    header.validate()
    pos = HEADER.size
    payloads = []
    for i in range(header.frame_count):
        if pos + FRAME_HEADER.size > len(data):
            raise TruncationError(f"frame {i} header truncated")
        idx, length = FRAME_HEADER.unpack_from(data, pos)
        pos += FRAME_HEADER.size
        if idx != i:
            raise ParseError(f"frame {i} carries coding order {idx}")
        if pos + length > len(data):
            raise TruncationError(f"frame {i} payload truncated")
        payloads.append(FramePayload(idx, data[pos:pos + length]))
        pos += length
    if pos != len(data):
        raise ParseError(f"{len(data) - pos} bytes of trailing garbage")
    return header, payloads


def write_stream(header: StreamHeader, payloads: List[FramePayload], path) -> int:
    """Write the stream; returns its size in bytes."""
    data = serialize(header, payloads)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return len(data)


def parse_stream(path) -> Tuple[StreamHeader, List[FramePayload]]:
    try:
        with open(os.fspath(path), "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return deserialize(data)
