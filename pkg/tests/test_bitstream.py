import hashlib
import json
import os
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdvk.bitstream import (
    HEADER,
    FramePayload,
    StreamHeader,
    deserialize,
    parse_stream,
    serialize,
    write_stream,
)
from rdvk.codec import decode_bytes
from rdvk.errors import ConfigError, ParseError, TruncationError, VersionError

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def header(n=2, **kw):
    args = dict(width=64, height=48, frame_count=n, fps_num=25, fps_den=1,
                intra_period=32, gop_size=8, quality_index=5)
    args.update(kw)
    return StreamHeader(**args)


def test_header_is_22_bytes(tmp_path):
    p = tmp_path / "empty.rdv"
    size = write_stream(header(0), [], p)
    assert size == 22 == HEADER.size
    assert os.path.getsize(p) == 22
    h, payloads = parse_stream(p)
    assert h == header(0) and payloads == []


def test_header_byte_layout():
    h = header(0, width=0x0102, height=0x0304, downsample=True)
    raw = h.pack()
    assert raw[:4] == b"RDV1"
    assert raw[4] == 1
    assert raw[5:7] == b"\x02\x01"
    assert raw[7:9] == b"\x04\x03"
    assert struct.unpack("<I", raw[9:13]) == (0,)
    assert raw[19:22] == bytes([8, 5, 1])


def test_roundtrip(tmp_path):
    payloads = [FramePayload(0, b"\x01\x02\x03"), FramePayload(1, b"")]
    p = tmp_path / "a.rdv"
    write_stream(header(2), payloads, p)
    assert parse_stream(p) == (header(2), payloads)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.binary(max_size=40), max_size=6), st.integers(1, 8), st.booleans())
def test_any_payloads_roundtrip(datas, q, ds):
    h = header(len(datas), quality_index=q, downsample=ds)
    payloads = [FramePayload(i, d) for i, d in enumerate(datas)]
    data = serialize(h, payloads)
    assert len(data) == 22 + sum(8 + len(d) for d in datas)
    assert deserialize(data) == (h, payloads)


def test_payload_count_mismatch():
    with pytest.raises(ConfigError):
        serialize(header(3), [FramePayload(0, b"")])


def test_bad_magic():
    with pytest.raises(ParseError):
        deserialize(b"XXXX" + bytes(30))


def test_truncated_mid_payload():
    data = serialize(header(2), [FramePayload(0, b"abcdef"), FramePayload(1, b"ghij")])
    with pytest.raises(TruncationError):
        deserialize(data[:-2])
    with pytest.raises(TruncationError):
        deserialize(data[:10])


def test_trailing_garbage():
    data = serialize(header(1), [FramePayload(0, b"ab")])
    with pytest.raises(ParseError):
        deserialize(data + b"\x00")


def test_quality_nine_rejected():
    raw = bytearray(serialize(header(0), []))
    raw[20] = 9
    with pytest.raises(ParseError):
        deserialize(bytes(raw))


def test_version_checked():
    raw = bytearray(serialize(header(0), []))
    raw[4] = 2
    with pytest.raises(VersionError):
        deserialize(bytes(raw))


def test_gop_larger_than_intra_period_rejected():
    with pytest.raises(ParseError):
        header(0, gop_size=64).validate()


def test_golden_stream_decodes():
    with open(os.path.join(GOLDEN, "sample.json")) as fh:
        meta = json.load(fh)
    with open(os.path.join(GOLDEN, "sample.rdv"), "rb") as fh:
        data = fh.read()
    assert hashlib.sha256(data).hexdigest() == meta["sha256_stream"]
    seq = decode_bytes(data)
    h = hashlib.sha256()
    for f in seq.frames:
        h.update(f.tobytes())
    assert h.hexdigest() == meta["sha256_decoded"]


def test_golden_stream_reencodes_identically():
    from synth import make_sequence

    from rdvk.codec import encode_sequence

    with open(os.path.join(GOLDEN, "sample.rdv"), "rb") as fh:
        data = fh.read()
    es = encode_sequence(make_sequence("mixed", 40, 24, 6, seed=7), 4, 2, 3)
    assert es.data == data
