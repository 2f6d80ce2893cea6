import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdvk.errors import ConfigError, ScheduleInvariantError
from rdvk.schedule import FrameSchedule, FrameType, ScheduleEntry, build_schedule, validate_schedule


def pattern(s):
    return [str(e) for e in s]


def test_three_frame_base_case():
    s = build_schedule(3, 32, 2)
    assert pattern(s) == ["0:I", "2:P(0)", "1:B(0,2)"]
    validate_schedule(s)


def test_two_segments():
    assert pattern(build_schedule(5, 4, 2)) == ["0:I", "2:P(0)", "1:B(0,2)", "3:P(2)", "4:I"]


def test_single_frame():
    assert pattern(build_schedule(1, 32, 8)) == ["0:I"]


def test_gop_one_is_all_p():
    assert pattern(build_schedule(4, 32, 1)) == ["0:I", "1:P(0)", "2:P(1)", "3:P(2)"]


def test_hierarchy_depth_gop8():
    s = build_schedule(9, 32, 8)
    assert pattern(s) == ["0:I", "8:P(0)", "4:B(0,8)", "2:B(0,4)", "1:B(0,2)", "3:B(2,4)",
                          "6:B(4,8)", "5:B(4,6)", "7:B(6,8)"]


def test_truncated_last_gop():
    # 0..6 with gop 4: second GOP is cut to frames 5..6
    assert pattern(build_schedule(7, 32, 4)) == [
        "0:I", "4:P(0)", "2:B(0,4)", "1:B(0,2)", "3:B(2,4)", "6:P(4)", "5:B(4,6)"]


@pytest.mark.parametrize("args", [(0, 32, 2), (5, 0, 1), (5, 32, 3), (5, 4, 8), (5, 32, 0)])
def test_bad_arguments(args):
    with pytest.raises(ConfigError):
        build_schedule(*args)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 400), st.sampled_from([32, 64, 128, 320]), st.sampled_from([1, 2, 4, 8, 16]))
def test_sweep_is_valid(n, ip, g):
    s = build_schedule(n, ip, g)
    validate_schedule(s)
    assert sorted(e.display_index for e in s) == list(range(n))
    assert sum(e.frame_type is FrameType.I for e in s) == -(-n // ip)


def replace(s, pos, **kw):
    entries = list(s.entries)
    entries[pos] = dataclasses.replace(entries[pos], **kw)
    return FrameSchedule(tuple(entries), s.intra_period, s.gop_size)


def test_b_with_bad_future_ref():
    s = build_schedule(3, 32, 2)
    with pytest.raises(ScheduleInvariantError):
        validate_schedule(replace(s, 2, ref_future=1))


def test_missing_display_index():
    s = build_schedule(5, 32, 1)
    entries = [e for e in s.entries if e.display_index != 3]
    entries = tuple(dataclasses.replace(e, coding_order=i) for i, e in enumerate(entries))
    # frame 4 referenced frame 3; point it at 2 so only the gap is wrong
    entries = entries[:-1] + (dataclasses.replace(entries[-1], ref_past=2),)
    with pytest.raises(ScheduleInvariantError, match="missing"):
        validate_schedule(FrameSchedule(entries, 32, 1))


def test_reference_must_be_coded_first():
    s = build_schedule(3, 32, 2)
    swapped = (s.entries[0], dataclasses.replace(s.entries[2], coding_order=1),
               dataclasses.replace(s.entries[1], coding_order=2))
    with pytest.raises(ScheduleInvariantError):
        validate_schedule(FrameSchedule(swapped, 32, 2))


def test_reference_across_segment():
    s = FrameSchedule((ScheduleEntry(0, FrameType.I), ScheduleEntry(1, FrameType.I, coding_order=1),
                       ScheduleEntry(2, FrameType.P, 0, coding_order=2)), 1, 1)
    with pytest.raises(ScheduleInvariantError):
        validate_schedule(s)


def test_jsonl_dump():
    lines = build_schedule(3, 32, 2).dump_jsonl().splitlines()
    recs = [json.loads(line) for line in lines]
    assert recs[2] == {"display_index": 1, "type": "B", "refs": [0, 2], "coding_order": 2}
