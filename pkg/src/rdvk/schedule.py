"""Coding order for I/P/hierarchical-B frame structures.

The sequence is cut into independent segments of ``intra_period`` frames.
Each segment opens with an I frame, then walks GOPs of ``gop_size`` frames:
the GOP's last frame is a P frame predicted from the previous anchor, and
the frames in between are B frames coded midpoint-first (floor midpoint),
each referencing the nearest coded frame on either side.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import List, Optional

from .errors import ConfigError, ScheduleInvariantError


class FrameType(str, enum.Enum):
    I = "I"
    P = "P"
    B = "B"

    @property
    def n_refs(self):
        return {"I": 0, "P": 1, "B": 2}[self.value]


@dataclass(frozen=True)
class ScheduleEntry:
    display_index: int
    frame_type: FrameType
    ref_past: Optional[int] = None
    ref_future: Optional[int] = None
    coding_order: int = 0

    @property
    def refs(self):
        return tuple(r for r in (self.ref_past, self.ref_future) if r is not None)

    def to_json(self):
        return json.dumps(
            {
                "display_index": self.display_index,
                "type": self.frame_type.value,
                "refs": list(self.refs),
                "coding_order": self.coding_order,
            }
        )

    def __str__(self):
        refs = ",".join(map(str, self.refs))
        return f"{self.display_index}:{self.frame_type.value}" + (f"({refs})" if refs else "")


@dataclass(frozen=True)
class FrameSchedule:
    entries: tuple
    intra_period: int
    gop_size: int

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def by_display(self):
        return sorted(self.entries, key=lambda e: e.display_index)

    def dump_jsonl(self):
        return "".join(e.to_json() + "\n" for e in self.entries)


def is_power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


def build_schedule(n_frames: int, intra_period: int, gop_size: int) -> FrameSchedule:
    if n_frames < 1:
        raise ConfigError("n_frames must be >= 1")
    if intra_period < 1:
        raise ConfigError("intra_period must be >= 1")
    if gop_size < 1 or not is_power_of_two(gop_size):
        raise ConfigError(f"gop_size {gop_size} is not a power of two")
    if gop_size > intra_period:
        raise ConfigError(f"gop_size {gop_size} exceeds intra_period {intra_period}")

    order: List[tuple] = []

    def bisect(lo, hi):
        if hi - lo < 2:
            return
        mid = (lo + hi) // 2
        order.append((mid, FrameType.B, lo, hi))
        bisect(lo, mid)
        bisect(mid, hi)

    for start in range(0, n_frames, intra_period):
        last = min(start + intra_period, n_frames) - 1
        order.append((start, FrameType.I, None, None))
        anchor = start
        while anchor < last:
            nxt = min(anchor + gop_size, last)
            order.append((nxt, FrameType.P, anchor, None))
            bisect(anchor, nxt)
            anchor = nxt

    entries = tuple(
        ScheduleEntry(d, t, p, f, coding_order=i) for i, (d, t, p, f) in enumerate(order)
    )
    return FrameSchedule(entries, intra_period, gop_size)


def validate_schedule(s: FrameSchedule) -> None:
    """Raise ScheduleInvariantError naming the first offending entry."""
    if not s.entries:
        raise ScheduleInvariantError("schedule is empty")
    n = max(e.display_index for e in s.entries) + 1
    seen = {}
    for pos, e in enumerate(s.entries):
        where = f"entry {e} (coding position {pos})"
        if e.coding_order != pos:
            raise ScheduleInvariantError(f"{where}: coding_order {e.coding_order} != {pos}")
        if e.display_index < 0:
            raise ScheduleInvariantError(f"{where}: negative display index")
        if e.display_index in seen:
            raise ScheduleInvariantError(f"{where}: display index coded twice")
        ftype = FrameType(e.frame_type)
        if ftype is FrameType.I:
            if e.ref_past is not None or e.ref_future is not None:
                raise ScheduleInvariantError(f"{where}: I frame with references")
        elif ftype is FrameType.P:
            if e.ref_past is None or e.ref_future is not None:
                raise ScheduleInvariantError(f"{where}: P frame needs exactly one past reference")
            if not e.ref_past < e.display_index:
                raise ScheduleInvariantError(f"{where}: P reference is not in the past")
        else:
            if e.ref_past is None or e.ref_future is None:
                raise ScheduleInvariantError(f"{where}: B frame needs two references")
            if not e.ref_past < e.display_index < e.ref_future:
                raise ScheduleInvariantError(f"{where}: B references do not bracket the frame")
        for r in e.refs:
            if r not in seen:
                raise ScheduleInvariantError(f"{where}: reference {r} not coded earlier")
            if r // s.intra_period != e.display_index // s.intra_period:
                raise ScheduleInvariantError(f"{where}: reference {r} crosses a segment boundary")
        if (ftype is FrameType.I) != (e.display_index % s.intra_period == 0):
            raise ScheduleInvariantError(f"{where}: I frames must open each intra period")
        seen[e.display_index] = pos
    first = s.entries[0]
    if first.frame_type is not FrameType.I or first.display_index != 0:
        raise ScheduleInvariantError(f"entry {first}: schedule must start with I frame 0")
    missing = sorted(set(range(n)) - set(seen))
    if missing:
        raise ScheduleInvariantError(f"display indices {missing} missing")
