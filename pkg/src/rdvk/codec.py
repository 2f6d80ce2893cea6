"""Whole-sequence encode/decode on top of the frame coder and the container."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List

from .bitstream import FramePayload, StreamHeader, deserialize, serialize
from .errors import ConfigError
from .media import Sequence, downsample_sequence, upsample_sequence
from .residual import (
    FrameStats,
    QualityLevel,
    decode_frame,
    encode_frame,
    frame_payload,
    new_decoder,
    new_encoder,
)
from .schedule import FrameSchedule, build_schedule

log = logging.getLogger(__name__)


@dataclass
class EncodedStream:
    header: StreamHeader
    payloads: List[FramePayload]
    schedule: FrameSchedule
    stats: List[FrameStats]  # coding order
    reconstruction: Sequence  # original resolution, as the decoder will output it
    data: bytes

    @property
    def bits(self):
        return 8 * len(self.data)


def _fps_fields(fps):
    fps = Fraction(fps)
    if not (0 < fps.numerator < 1 << 16 and 0 < fps.denominator < 1 << 16):
        raise ConfigError(f"frame rate {fps} does not fit the header")
    return fps.numerator, fps.denominator


def encode_sequence(seq: Sequence, intra_period: int, gop_size: int, quality: int,
                    downsample: bool = False, check=False) -> EncodedStream:
    if not seq.frames:
        raise ConfigError("cannot encode an empty sequence")
    q = QualityLevel(quality)
    schedule = build_schedule(len(seq), intra_period, gop_size)
    fps_num, fps_den = _fps_fields(seq.fps)
    header = StreamHeader(seq.width, seq.height, len(seq), fps_num, fps_den,
                          intra_period, gop_size, quality, bool(downsample))
    header.validate()
    src = downsample_sequence(seq) if downsample else seq

    recon = {}
    payloads, stats = [], []
    for entry in schedule:
        session = new_encoder()
        frame, st = encode_frame(src.frames[entry.display_index], entry, recon, q, session,
                                 check=check)
        data = frame_payload(session, st)
        recon[entry.display_index] = frame
        payloads.append(FramePayload(entry.coding_order, data))
        stats.append(st)
        log.debug("frame %s: %d bytes, %d coded / %d skip", entry, len(data), st.n_coded, st.n_skip)

    out = Sequence([recon[i] for i in range(len(seq))], seq.fps, seq.name)
    if downsample:
        out = upsample_sequence(out, seq.width, seq.height)
    return EncodedStream(header, payloads, schedule, stats, out, serialize(header, payloads))


def decode_bytes(data: bytes, name="decoded") -> Sequence:
    """Decode a complete .rdv byte string to a Sequence at original resolution."""
    header, payloads = deserialize(data)
    fps = Fraction(header.fps_num, header.fps_den)
    if header.frame_count == 0:
        return Sequence([], fps, name)
    q = QualityLevel(header.quality_index)
    schedule = build_schedule(header.frame_count, header.intra_period, header.gop_size)
    w, h = header.width, header.height
    if header.downsample:
        w, h = w // 2, h // 2
    recon = {}
    for entry, payload in zip(schedule, payloads):
        recon[entry.display_index] = decode_frame(entry, recon, q, new_decoder(payload.data), w, h)
    out = Sequence([recon[i] for i in range(header.frame_count)], fps, name)
    if header.downsample:
        out = upsample_sequence(out, header.width, header.height)
    return out
