import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdvk.entropy import (
    COST,
    COST_SCALE,
    MAX_EG_PREFIX,
    BinaryContext,
    BitCounter,
    RangeDecoder,
    RangeEncoder,
    code_seg0,
    code_ueg0,
    decode_bit,
    decode_bypass,
    encode_bit,
    encode_bypass,
    new_contexts,
    restore,
    snapshot,
)
from rdvk.errors import BitstreamError

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "entropy_vectors.json")


def entropy(p):
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def run_ops(ops, n_ctx):
    enc = RangeEncoder(n_ctx)
    for op in ops:
        if op[0] == "bit":
            enc.bit(enc.contexts[op[1]], op[2])
        else:
            enc.bypass(op[1], op[2])
    return enc.finish()


def replay(data, ops, n_ctx):
    dec = RangeDecoder(data, n_ctx)
    out = []
    for op in ops:
        if op[0] == "bit":
            out.append(dec.bit(dec.contexts[op[1]]))
        else:
            out.append(dec.bypass(None, op[2]))
    dec.finish()
    return out


def expected(ops):
    return [op[2] if op[0] == "bit" else op[1] for op in ops]


def test_bypass_half_rate():
    rng = np.random.default_rng(0)
    enc = RangeEncoder()
    for b in rng.integers(0, 2, 100_000).tolist():
        encode_bypass(b, 1, enc)
    assert abs(len(enc.finish()) - 12500) <= 0.02 * 12500


def test_skewed_adaptive_rate():
    rng = np.random.default_rng(1)
    bits = (rng.random(100_000) < 0.99).astype(int).tolist()
    enc = RangeEncoder(1)
    ctx = enc.contexts[0]
    for b in bits:
        encode_bit(ctx, b, enc)
    n_bytes = len(enc.finish())
    assert n_bytes <= 1.02 * len(bits) * entropy(0.99) / 8


def test_empty_flush_is_short():
    assert len(RangeEncoder().finish()) <= 5


def test_empty_payload_raises_on_first_read():
    data = RangeEncoder(1).finish()
    dec = RangeDecoder(data, 1)
    with pytest.raises(BitstreamError):
        decode_bit(dec.contexts[0], dec)


def test_random_trace_roundtrip_64_contexts():
    rng = np.random.default_rng(2)
    n = 200_000
    ctx_ids = rng.integers(0, 64, n).tolist()
    probs = rng.random(64)
    bits = (rng.random(n) < probs[ctx_ids]).astype(int).tolist()
    enc = RangeEncoder(64)
    for c, b in zip(ctx_ids, bits):
        enc.bit(enc.contexts[c], b)
    data = enc.finish()
    dec = RangeDecoder(data, 64)
    got = [dec.bit(dec.contexts[c]) for c in ctx_ids]
    dec.finish()
    assert got == bits


def test_thread_count_does_not_change_bytes():
    rng = np.random.default_rng(3)
    ops = [["bit", int(c), int(b)] for c, b in zip(rng.integers(0, 4, 5000), rng.integers(0, 2, 5000))]
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda _: run_ops(ops, 4), range(8)))
    assert len(set(outs)) == 1
    assert outs[0] == run_ops(ops, 4)


def test_bypass_examples():
    enc = RangeEncoder()
    encode_bypass(5, 3, enc)
    encode_bypass(0, 0, enc)
    encode_bypass(0xFFFFFFFF, 32, enc)
    dec = RangeDecoder(enc.finish())
    assert decode_bypass(3, dec) == 5
    assert decode_bypass(0, dec) == 0
    assert decode_bypass(32, dec) == 0xFFFFFFFF
    dec.finish()


def test_bypass_width_zero_is_noop():
    enc = RangeEncoder()
    encode_bypass(0, 0, enc)
    assert enc.finish() == b""


def test_bypass_value_must_fit():
    with pytest.raises(ValueError):
        encode_bypass(8, 3, RangeEncoder())


def test_golden_vectors():
    with open(GOLDEN) as fh:
        vectors = json.load(fh)
    assert len(vectors) >= 5
    for v in vectors:
        data = bytes.fromhex(v["hex"])
        assert run_ops(v["ops"], v["n_contexts"]) == data
        assert replay(data, v["ops"], v["n_contexts"]) == expected(v["ops"])


def test_unread_bytes_detected():
    enc = RangeEncoder(1)
    for _ in range(50):
        enc.bit(enc.contexts[0], 1)
    dec = RangeDecoder(enc.finish() + bytes(8), 1)
    for _ in range(50):
        dec.bit(dec.contexts[0])
    with pytest.raises(BitstreamError):
        dec.finish()


def test_reading_far_past_end_raises():
    enc = RangeEncoder(1)
    enc.bit(enc.contexts[0], 1)
    dec = RangeDecoder(enc.finish())
    with pytest.raises(BitstreamError):
        for _ in range(200):
            dec.bypass(None, 8)


def test_context_probability_stays_in_range():
    ctx = BinaryContext()
    for _ in range(20_000):
        ctx.update(1)
    assert ctx.p == 4095
    for _ in range(20_000):
        ctx.update(0)
    assert ctx.p == 1


def test_first_updates_follow_kt_estimator():
    # after k ones in n bits the estimate is (k + 1/2) / (n + 1)
    ctx = BinaryContext()
    seq = [1, 1, 0, 1, 1, 1, 0, 1]
    ones = 0
    for n, b in enumerate(seq, start=1):
        ctx.update(b)
        ones += b
        assert abs(ctx.state / (1 << 24) - (ones + 0.5) / (n + 1)) < 1e-6


def test_cost_table_matches_log2():
    for p in (1, 17, 1024, 2048, 4000, 4095):
        assert abs(COST[p] / COST_SCALE + math.log2(p / 4096)) < 1e-4


def test_bit_counter_matches_encoder_cost():
    rng = np.random.default_rng(4)
    ops = [(int(c), int(b)) for c, b in zip(rng.integers(0, 3, 3000), rng.random(3000) < 0.8)]
    enc = RangeEncoder(3)
    counter = BitCounter(new_contexts(3))
    for c, b in ops:
        enc.bit(enc.contexts[c], b)
        counter.bit(counter.contexts[c], b)
    assert counter.cost == enc.cost
    # the ideal cost predicts the real size to within a few bytes
    assert abs(len(enc.finish()) * 8 - enc.bits_written) < 40


def test_snapshot_restore():
    ctxs = new_contexts(3)
    snap = snapshot(ctxs)
    for c in ctxs:
        c.update(1)
    restore(ctxs, snap)
    assert snapshot(ctxs) == snap


@pytest.mark.parametrize("value", [0, 1, 2, 3, 7, 100, 65535, (1 << 20) + 5])
def test_ueg0_roundtrip(value):
    enc = RangeEncoder(4)
    code_ueg0(enc, enc.contexts, value)
    dec = RangeDecoder(enc.finish(), 4)
    assert code_ueg0(dec, dec.contexts) == value
    dec.finish()


def test_ueg0_prefix_limit():
    enc = RangeEncoder(1)
    for _ in range(MAX_EG_PREFIX + 3):
        enc.bit(enc.contexts[0], 1)
    dec = RangeDecoder(enc.finish(), 1)
    with pytest.raises(BitstreamError):
        code_ueg0(dec, dec.contexts)


trace_ops = st.lists(
    st.one_of(
        st.tuples(st.just("bit"), st.integers(0, 5), st.integers(0, 1)),
        st.integers(0, 16).flatmap(
            lambda w: st.tuples(st.just("bypass"), st.integers(0, (1 << w) - 1), st.just(w))
        ),
    ),
    max_size=400,
)


@settings(max_examples=150, deadline=None)
@given(trace_ops)
def test_any_trace_roundtrips(ops):
    ops = [list(o) for o in ops]
    data = run_ops(ops, 6)
    assert replay(data, ops, 6) == expected(ops)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-5000, 5000), max_size=50))
def test_seg0_roundtrip(values):
    enc = RangeEncoder(3)
    for v in values:
        code_seg0(enc, enc.contexts, v)
    dec = RangeDecoder(enc.finish(), 3)
    assert [code_seg0(dec, dec.contexts) for _ in values] == values
    dec.finish()
