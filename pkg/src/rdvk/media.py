"""Raw video I/O (Y4M, headerless I420) and 2x bilinear resampling."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import List

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    IoError,
    ParseError,
    TruncationError,
    UnsupportedFormat,
)

Y4M_MAGIC = b"YUV4MPEG2"


def chroma_size(width, height):
    return (width + 1) // 2, (height + 1) // 2


@dataclass
class Frame:
    """One 4:2:0 8-bit picture. Planes are uint8 arrays indexed [row, col]."""

    width: int
    height: int
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    display_index: int = 0

    def __post_init__(self):
        cw, ch = chroma_size(self.width, self.height)
        if self.y.shape != (self.height, self.width):
            raise DimensionError(f"luma plane {self.y.shape} != {(self.height, self.width)}")
        for name in ("cb", "cr"):
            if getattr(self, name).shape != (ch, cw):
                raise DimensionError(f"{name} plane {getattr(self, name).shape} != {(ch, cw)}")
        for name in ("y", "cb", "cr"):
            plane = getattr(self, name)
            if plane.dtype != np.uint8:
                if plane.size and (plane.min() < 0 or plane.max() > 255):
                    raise DimensionError(f"{name} samples outside [0, 255]")
                setattr(self, name, plane.astype(np.uint8))

    @property
    def planes(self):
        return (self.y, self.cb, self.cr)

    @classmethod
    def filled(cls, width, height, value=128, display_index=0):
        cw, ch = chroma_size(width, height)
        return cls(
            width,
            height,
            np.full((height, width), value, np.uint8),
            np.full((ch, cw), value, np.uint8),
            np.full((ch, cw), value, np.uint8),
            display_index,
        )

    def with_index(self, display_index):
        return Frame(self.width, self.height, self.y, self.cb, self.cr, display_index)

    def same_samples(self, other):
        return (
            self.width == other.width
            and self.height == other.height
            and all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))
        )

    def tobytes(self):
        return self.y.tobytes() + self.cb.tobytes() + self.cr.tobytes()


@dataclass
class Sequence:
    frames: List[Frame]
    fps: Fraction = Fraction(25)
    name: str = "sequence"

    def __post_init__(self):
        self.fps = Fraction(self.fps)
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (self.width, self.height):
                raise DimensionError(f"frame {i} geometry differs from frame 0")
            if f.display_index != i:
                raise ConfigError(f"frame {i} has display_index {f.display_index}")

    def __len__(self):
        return len(self.frames)

    @property
    def width(self):
        return self.frames[0].width if self.frames else 0

    @property
    def height(self):
        return self.frames[0].height if self.frames else 0

    @property
    def duration(self):
        """Seconds covered by the sequence."""
        return len(self.frames) / self.fps


def frame_from_bytes(buf, width, height, display_index=0):
    cw, ch = chroma_size(width, height)
    ys, cs = width * height, cw * ch
    arr = np.frombuffer(buf, np.uint8)
    return Frame(
        width,
        height,
        arr[:ys].reshape(height, width).copy(),
        arr[ys:ys + cs].reshape(ch, cw).copy(),
        arr[ys + cs:ys + 2 * cs].reshape(ch, cw).copy(),
        display_index,
    )


def _parse_y4m_header(line):
    parts = line.split(b" ")
    if parts[0] != Y4M_MAGIC:
        raise ParseError("missing YUV4MPEG2 signature")
    width = height = None
    fps = Fraction(25)
    for tok in parts[1:]:
        if not tok:
            continue
        key, val = tok[:1], tok[1:].decode("ascii", "replace")
        try:
            if key == b"W":
                width = int(val)
            elif key == b"H":
                height = int(val)
            elif key == b"F":
                num, den = val.split(":")
                fps = Fraction(int(num), int(den))
            elif key == b"C":
                if not val.startswith("420"):
                    raise UnsupportedFormat(f"chroma format C{val} is not supported (4:2:0 only)")
                if val not in ("420", "420jpeg", "420mpeg2", "420paldv"):
                    raise UnsupportedFormat(f"chroma format C{val} is not supported (8-bit 4:2:0 only)")
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad Y4M header field {tok!r}") from exc
    if not width or not height or width < 1 or height < 1:
        raise ParseError("Y4M header lacks valid W/H")
    return width, height, fps


def read_y4m(data: bytes, name="sequence") -> Sequence:
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("unterminated Y4M header")
    width, height, fps = _parse_y4m_header(data[:nl])
    cw, ch = chroma_size(width, height)
    fsize = width * height + 2 * cw * ch
    frames = []
    pos = nl + 1
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0:
            raise TruncationError(f"truncated FRAME header at byte {pos}")
        if not data[pos:end].startswith(b"FRAME"):
            raise ParseError(f"expected FRAME marker at byte {pos}")
        pos = end + 1
        if pos + fsize > len(data):
            raise TruncationError(f"frame {len(frames)} payload truncated")
        frames.append(frame_from_bytes(data[pos:pos + fsize], width, height, len(frames)))
        pos += fsize
    return Sequence(frames, fps, name)


def read_raw(data: bytes, width, height, n_frames=None, fps=Fraction(25), name="sequence") -> Sequence:
    cw, ch = chroma_size(width, height)
    fsize = width * height + 2 * cw * ch
    if n_frames is None:
        if len(data) % fsize:
            raise TruncationError("raw file size is not a whole number of frames")
        n_frames = len(data) // fsize
    if len(data) < n_frames * fsize:
        raise TruncationError(f"raw file holds {len(data)} bytes, {n_frames * fsize} needed")
    frames = [
        frame_from_bytes(data[i * fsize:(i + 1) * fsize], width, height, i)
        for i in range(n_frames)
    ]
    return Sequence(frames, fps, name)


def load_sequence(path, format=None, width=None, height=None, n_frames=None, fps=Fraction(25)) -> Sequence:
    """Load a Y4M file or (with ``format="raw"`` and geometry) a raw I420 file."""
    path = os.fspath(path)
    name = os.path.splitext(os.path.basename(path))[0]
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if format is None:
        format = "y4m" if data.startswith(Y4M_MAGIC) or path.endswith(".y4m") else "raw"
    if format == "y4m":
        return read_y4m(data, name)
    if format == "raw":
        if not width or not height:
            raise ConfigError("raw input needs width and height")
        return read_raw(data, width, height, n_frames, fps, name)
    raise ConfigError(f"unknown format {format!r}")


def y4m_bytes(seq: Sequence) -> bytes:
    if not seq.frames:
        raise ConfigError("cannot store an empty sequence")
    fps = Fraction(seq.fps)
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{fps.numerator}:{fps.denominator} Ip A1:1 C420jpeg\n"
    chunks = [header.encode("ascii")]
    for f in seq.frames:
        chunks.append(b"FRAME\n")
        chunks.append(f.tobytes())
    return b"".join(chunks)


def store_sequence(seq: Sequence, path) -> None:
    data = y4m_bytes(seq)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(str(exc)) from exc


# -- resampling ---------------------------------------------------------------

def _round_u8(x):
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def downsample_plane(plane, out_h, out_w):
    """Mean of 2x2 blocks; blocks reaching past the edge reuse the last row/column."""
    h, w = plane.shape
    rows = np.minimum(np.arange(2 * out_h), h - 1)
    cols = np.minimum(np.arange(2 * out_w), w - 1)
    p = plane[np.ix_(rows, cols)].astype(np.int32)
    s = p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2]
    # s / 4 is exact in binary floating point
    return _round_u8(s / 4.0)


def _upsample_axis_taps(n_in, n_out):
    # output x sits at input coordinate x / 2 - 1/4
    x = np.arange(n_out)
    k = x >> 1
    other = np.where(x & 1, k + 1, k - 1)
    return np.clip(k, 0, n_in - 1), np.clip(other, 0, n_in - 1)


def upsample_plane(plane, out_h, out_w):
    h, w = plane.shape
    r0, r1 = _upsample_axis_taps(h, out_h)
    c0, c1 = _upsample_axis_taps(w, out_w)
    p = plane.astype(np.int64)
    # weights 3/4 and 1/4 per axis -> integer sum over 16
    s = (
        9 * p[np.ix_(r0, c0)]
        + 3 * p[np.ix_(r0, c1)]
        + 3 * p[np.ix_(r1, c0)]
        + p[np.ix_(r1, c1)]
    )
    return _round_u8(s / 16.0)


def downsample2x(frame: Frame) -> Frame:
    if frame.width < 2 or frame.height < 2:
        raise DimensionError(f"cannot downsample {frame.width}x{frame.height}")
    w, h = frame.width // 2, frame.height // 2
    cw, ch = chroma_size(w, h)
    return Frame(
        w,
        h,
        downsample_plane(frame.y, h, w),
        downsample_plane(frame.cb, ch, cw),
        downsample_plane(frame.cr, ch, cw),
        frame.display_index,
    )


def upsample2x(frame: Frame, target_w: int, target_h: int) -> Frame:
    if target_w not in (2 * frame.width, 2 * frame.width + 1) or target_h not in (
        2 * frame.height,
        2 * frame.height + 1,
    ):
        raise DimensionError(
            f"cannot upsample {frame.width}x{frame.height} to {target_w}x{target_h}"
        )
    cw, ch = chroma_size(target_w, target_h)
    return Frame(
        target_w,
        target_h,
        upsample_plane(frame.y, target_h, target_w),
        upsample_plane(frame.cb, ch, cw),
        upsample_plane(frame.cr, ch, cw),
        frame.display_index,
    )


def downsample_sequence(seq: Sequence) -> Sequence:
    return Sequence([downsample2x(f) for f in seq.frames], seq.fps, seq.name)


def upsample_sequence(seq: Sequence, width: int, height: int) -> Sequence:
    return Sequence([upsample2x(f, width, height) for f in seq.frames], seq.fps, seq.name)
