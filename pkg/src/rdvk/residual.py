"""Per-block Skip / transform-coded residual decision and frame coding.

Each 16x16 luma block (plus its two 8x8 chroma blocks) is either copied from
the motion-compensated prediction (Skip) or corrected by a quantised 8x8
DCT residual.  The decision minimises ``SSD + lambda_mode * bits`` where the
bits of the coded alternative come from a trial encode on a snapshot of the
context table.  I frames use a flat 128 prediction and code every block.

Frame payload layout (one range-coder session per frame):

1. motion field (P/B frames only), see :func:`rdvk.motion.code_motion`
2. per block in raster order: mode flag (P/B only), then for coded blocks
   six 8x8 level blocks (Y0 Y1 Y2 Y3 Cb Cr), each as coded-block flag,
   zigzag significance / last flags, greater-than-one flag, exp-Golomb
   remainder and a bypass sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .entropy import (
    BitCounter,
    COST_SCALE,
    RangeDecoder,
    RangeEncoder,
    bit_cost,
    code_ueg0,
    restore,
    snapshot,
)
from .errors import BitstreamError, ConfigError, RangeError, ScheduleInvariantError
from .media import Frame, chroma_size
from .motion import (
    BLOCK,
    MOTION_CONTEXTS,
    MotionField,
    code_motion,
    estimate_motion,
    grid_shape,
    pad_plane,
    predict_planes,
)
from .schedule import FrameType, ScheduleEntry

N_QUALITIES = 8
MAX_LEVEL = 1 << 15

# context layout, after the motion contexts
CTX_ALPHA = MOTION_CONTEXTS  # 3, by number of coded neighbours
CTX_CBF = CTX_ALPHA + 3  # 2 plane kinds
CTX_SIG = CTX_CBF + 2  # 2 x 16 bands
CTX_LAST = CTX_SIG + 32  # 2 x 16 bands
CTX_GT1 = CTX_LAST + 32  # 2 x 2
CTX_LEVEL = CTX_GT1 + 4  # 2 x 4 exp-Golomb prefix
NUM_CONTEXTS = CTX_LEVEL + 8


@dataclass(frozen=True)
class QualityLevel:
    index: int

    def __post_init__(self):
        if not 1 <= self.index <= N_QUALITIES:
            raise ConfigError(f"quality index {self.index} outside 1..{N_QUALITIES}")

    @property
    def delta(self):
        """Quantiser step 128 * 2**(-(i-1)/2), built from exact operations."""
        k = self.index - 1
        base = 128.0 if k % 2 == 0 else 64.0 * math.sqrt(2.0)
        return math.ldexp(base, -(k // 2))

    @property
    def lambda_mode(self):
        return 0.1 * self.delta ** 2


def _dct_matrix():
    c = np.empty((8, 8))
    for k in range(8):
        a = math.sqrt(1 / 8) if k == 0 else math.sqrt(2 / 8)
        for n in range(8):
            c[k, n] = a * math.cos(math.pi * (2 * n + 1) * k / 16)
    return c


DCT = _dct_matrix()


def _mul_rows(m, x):
    """out[..., i, :] = sum_k m[i, k] * x[..., k, :], summed in fixed k order.

    Written as elementwise ops so the result does not depend on BLAS kernels
    or array alignment; encoder and decoder must agree bit for bit.
    """
    out = m[:, 0, None] * x[..., 0:1, :]
    for k in range(1, 8):
        out = out + m[:, k, None] * x[..., k:k + 1, :]
    return out


def _separable(m, x):
    y = _mul_rows(m, x)
    return np.swapaxes(_mul_rows(m, np.swapaxes(y, -1, -2)), -1, -2)


def transform_block(block, direction="forward"):
    """Orthonormal 8x8 DCT-II (forward) or DCT-III with integer rounding (inverse).

    Accepts a single 8x8 block or a stack (..., 8, 8).
    """
    x = np.asarray(block, dtype=np.float64)
    if x.shape[-2:] != (8, 8):
        raise ConfigError(f"expected 8x8 blocks, got {x.shape}")
    if direction == "forward":
        return _separable(DCT, x)
    if direction == "inverse":
        return np.rint(_separable(DCT.T, x)).astype(np.int64)
    raise ConfigError(f"unknown direction {direction!r}")


def quantize_block(coeffs, q: QualityLevel, direction="quantize"):
    delta = q.delta
    c = np.asarray(coeffs)
    if direction == "quantize":
        c = c.astype(np.float64)
        levels = (np.sign(c) * np.floor(np.abs(c) / delta + 0.5)).astype(np.int64)
        if levels.size and np.abs(levels).max() > MAX_LEVEL:
            raise RangeError("quantised level magnitude exceeds 2**15")
        return levels
    if direction == "dequantize":
        return c.astype(np.float64) * delta
    raise ConfigError(f"unknown direction {direction!r}")


def _zigzag():
    order = sorted(
        ((r, c) for r in range(8) for c in range(8)),
        key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1]),
    )
    return np.array([r * 8 + c for r, c in order])


ZIGZAG = _zigzag()


@dataclass
class FrameStats:
    frame_type: FrameType
    r_motion: float = 0.0
    r_residual: float = 0.0
    mse: float = 0.0
    n_skip: int = 0
    n_coded: int = 0
    payload_bytes: int = 0
    copy_frame: bool = False
    motion: Optional[MotionField] = field(default=None, repr=False)

    @property
    def bits(self):
        return self.r_motion + self.r_residual


def code_levels(session, levels, kind):
    """Code (or decode into ``levels``) one 8x8 block of zigzag-ordered levels.

    ``kind`` is 0 for luma, 1 for chroma.  ``levels`` is a length-64 list.
    """
    ctxs = session.contexts
    sig_c = ctxs[CTX_SIG + 16 * kind:CTX_SIG + 16 * kind + 16]
    last_c = ctxs[CTX_LAST + 16 * kind:CTX_LAST + 16 * kind + 16]
    gt1_c = ctxs[CTX_GT1 + 2 * kind:CTX_GT1 + 2 * kind + 2]
    lev_c = ctxs[CTX_LEVEL + 4 * kind:CTX_LEVEL + 4 * kind + 4]
    cbf = ctxs[CTX_CBF + kind]
    bit = session.bit
    if session.decoding:
        if not bit(cbf):
            return levels
        big = 0
        for i in range(64):
            band = i >> 2
            if not bit(sig_c[band]):
                continue
            a = 1
            if bit(gt1_c[big]):
                a = 2 + code_ueg0(session, lev_c)
                big = 1
                if a > MAX_LEVEL:
                    raise BitstreamError("level magnitude out of range")
            levels[i] = -a if session.bypass(None, 1) else a
            if bit(last_c[band]):
                return levels
        raise BitstreamError("coefficient block without a last flag")
    last = -1
    for i in range(63, -1, -1):
        if levels[i]:
            last = i
            break
    if not bit(cbf, int(last >= 0)):
        return levels
    big = 0
    for i in range(last + 1):
        v = levels[i]
        band = i >> 2
        bit(sig_c[band], int(v != 0))
        if not v:
            continue
        a = v if v > 0 else -v
        if bit(gt1_c[big], int(a > 1)):
            code_ueg0(session, lev_c, a - 2)
            big = 1
        session.bypass(int(v < 0), 1)
        bit(last_c[band], int(i == last))
    return levels


def _split_blocks(y, cb, cr, rows, cols):
    """Stack of (rows*cols, 6, 8, 8) blocks in coding order Y0 Y1 Y2 Y3 Cb Cr."""
    ly = y.reshape(rows, 2, 8, cols, 2, 8).transpose(0, 3, 1, 4, 2, 5).reshape(rows * cols, 4, 8, 8)
    c1 = cb.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3).reshape(rows * cols, 1, 8, 8)
    c2 = cr.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3).reshape(rows * cols, 1, 8, 8)
    return np.concatenate([ly, c1, c2], axis=1)


def _merge_blocks(blocks, rows, cols):
    ly = blocks[:, :4].reshape(rows, cols, 2, 2, 8, 8).transpose(0, 2, 4, 1, 3, 5)
    y = ly.reshape(rows * 16, cols * 16)
    cb = blocks[:, 4].reshape(rows, cols, 8, 8).transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)
    cr = blocks[:, 5].reshape(rows, cols, 8, 8).transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)
    return y, cb, cr


def _visible_mask(width, height, rows, cols):
    H, W = rows * BLOCK, cols * BLOCK
    cw, ch = chroma_size(width, height)
    y = np.zeros((H, W), np.int64)
    y[:height, :width] = 1
    c = np.zeros((H // 2, W // 2), np.int64)
    c[:ch, :cw] = 1
    return _split_blocks(y, c, c, rows, cols)


def _crop_frame(planes, width, height, display_index):
    cw, ch = chroma_size(width, height)
    y, cb, cr = planes
    return Frame(
        width,
        height,
        np.ascontiguousarray(y[:height, :width]),
        np.ascontiguousarray(cb[:ch, :cw]),
        np.ascontiguousarray(cr[:ch, :cw]),
        display_index,
    )


def _check_refs(entry: ScheduleEntry, refs, width, height):
    out = []
    for r in entry.refs:
        if r not in refs:
            raise ScheduleInvariantError(f"frame {entry}: reference {r} not available")
        ref = refs[r]
        if (ref.width, ref.height) != (width, height):
            raise ScheduleInvariantError(f"frame {entry}: reference {r} has wrong geometry")
        out.append(ref)
    if len(out) != FrameType(entry.frame_type).n_refs:
        raise ScheduleInvariantError(f"frame {entry}: wrong number of references")
    return out


def _prediction(entry, refs, field, H, W):
    if entry.frame_type is FrameType.I:
        return [np.full((H, W), 128, np.uint8), np.full((H // 2, W // 2), 128, np.uint8),
                np.full((H // 2, W // 2), 128, np.uint8)]
    ref_p = refs[0]
    ref_f = refs[1] if len(refs) > 1 else None
    return predict_planes(field, ref_p, ref_f, H, W)


def _alpha_ctx(coded, r, c):
    n = 0
    if c > 0 and coded[r][c - 1]:
        n += 1
    if r > 0 and coded[r - 1][c]:
        n += 1
    return CTX_ALPHA + n


def frame_payload(session, stats):
    """Finished payload bytes; copy frames are sent as an empty payload."""
    data = session.finish()
    if stats.copy_frame:
        stats.r_motion = stats.r_residual = 0.0
        data = b""
    stats.payload_bytes = len(data)
    return data


def new_encoder():
    return RangeEncoder(NUM_CONTEXTS)


def new_decoder(payload):
    return RangeDecoder(payload, NUM_CONTEXTS)


def encode_frame(target: Frame, entry: ScheduleEntry, refs: Dict[int, Frame], q: QualityLevel,
                 session: RangeEncoder, field: Optional[MotionField] = None, check=False):
    """Code ``target`` into ``session``; returns ``(reconstruction, stats)``.

    ``refs`` maps display index to encoder-side reconstructions.  A
    precomputed motion ``field`` may be supplied; otherwise it is estimated.
    With ``check`` set, every mode decision is re-verified against the
    alternative's Lagrangian cost.
    """
    width, height = target.width, target.height
    ref_frames = _check_refs(entry, refs, width, height)
    ftype = FrameType(entry.frame_type)
    rows, cols = grid_shape(width, height)
    H, W = rows * BLOCK, cols * BLOCK
    stats = FrameStats(ftype)

    if ftype is not FrameType.I:
        if field is None:
            field = estimate_motion(target, *ref_frames)
        _, stats.r_motion = code_motion(session, field)
        stats.motion = field
    pred = _prediction(entry, ref_frames, field, H, W)
    tgt = [pad_plane(target.y, H, W), pad_plane(target.cb, H // 2, W // 2),
           pad_plane(target.cr, H // 2, W // 2)]

    tb = _split_blocks(*tgt, rows, cols).astype(np.int64)
    pb = _split_blocks(*pred, rows, cols).astype(np.int64)
    levels = quantize_block(transform_block(tb - pb, "forward"), q)
    rec_res = transform_block(quantize_block(levels, q, "dequantize"), "inverse")
    rec_coded = np.clip(pb + rec_res, 0, 255)
    # distortion only counts samples inside the picture, not the padding
    vis = _visible_mask(width, height, rows, cols)
    d_skip = (vis * (tb - pb) ** 2).sum(axis=(1, 2, 3))
    d_coded = (vis * (tb - rec_coded) ** 2).sum(axis=(1, 2, 3))
    zz = levels.reshape(rows * cols, 6, 64)[:, :, ZIGZAG].tolist()

    lam = q.lambda_mode
    ctxs = session.contexts
    coded = [[False] * cols for _ in range(rows)]
    res_start = session.cost
    out = pb.copy()
    for b in range(rows * cols):
        r, c = divmod(b, cols)
        if ftype is FrameType.I:
            is_coded = True
        else:
            actx = ctxs[_alpha_ctx(coded, r, c)]
            r_skip = bit_cost(actx, 0)
            snap = snapshot(ctxs)
            trial = BitCounter(ctxs)
            trial.bit(actx, 1)
            for k in range(6):
                code_levels(trial, zz[b][k], 0 if k < 4 else 1)
            r_coded = trial.cost
            restore(ctxs, snap)
            j_skip = d_skip[b] + lam * r_skip / COST_SCALE
            j_coded = d_coded[b] + lam * r_coded / COST_SCALE
            is_coded = j_coded < j_skip
            if check:
                chosen, other = (j_coded, j_skip) if is_coded else (j_skip, j_coded)
                assert chosen <= other, (b, chosen, other)
            session.bit(actx, int(is_coded))
        coded[r][c] = is_coded
        if is_coded:
            for k in range(6):
                code_levels(session, zz[b][k], 0 if k < 4 else 1)
            out[b] = rec_coded[b]
            stats.n_coded += 1
        else:
            stats.n_skip += 1
    stats.r_residual = (session.cost - res_start) / COST_SCALE
    stats.copy_frame = ftype is not FrameType.I and stats.n_coded == 0 and field.is_zero

    recon = _crop_frame(_merge_blocks(out.astype(np.uint8), rows, cols), width, height,
                        target.display_index)
    diff = recon.y.astype(np.float64) - target.y
    stats.mse = float(np.mean(diff * diff))
    return recon, stats


def decode_frame(entry: ScheduleEntry, refs: Dict[int, Frame], q: QualityLevel,
                 session: RangeDecoder, width: int, height: int) -> Frame:
    ref_frames = _check_refs(entry, refs, width, height)
    ftype = FrameType(entry.frame_type)
    rows, cols = grid_shape(width, height)
    H, W = rows * BLOCK, cols * BLOCK
    if ftype is not FrameType.I and session.empty:
        # empty payload: exact copy of the past reference
        return ref_frames[0].with_index(entry.display_index)
    field = None
    if ftype is not FrameType.I:
        field, _ = code_motion(session, shape=(rows, cols), bidirectional=ftype is FrameType.B)
    pred = _prediction(entry, ref_frames, field, H, W)
    pb = _split_blocks(*pred, rows, cols).astype(np.int64)

    ctxs = session.contexts
    coded = [[False] * cols for _ in range(rows)]
    zz = np.zeros((rows * cols, 6, 64), np.int64)
    any_coded = np.zeros(rows * cols, bool)
    for b in range(rows * cols):
        r, c = divmod(b, cols)
        if ftype is FrameType.I:
            is_coded = True
        else:
            is_coded = bool(session.bit(ctxs[_alpha_ctx(coded, r, c)]))
        coded[r][c] = is_coded
        if is_coded:
            any_coded[b] = True
            for k in range(6):
                lv = code_levels(session, [0] * 64, 0 if k < 4 else 1)
                zz[b, k] = lv
    session.finish()

    levels = np.zeros_like(zz)
    levels[:, :, ZIGZAG] = zz
    levels = levels.reshape(rows * cols, 6, 8, 8)
    rec_res = transform_block(quantize_block(levels, q, "dequantize"), "inverse")
    out = np.where(any_coded[:, None, None, None], np.clip(pb + rec_res, 0, 255), pb)
    return _crop_frame(_merge_blocks(out.astype(np.uint8), rows, cols), width, height,
                       entry.display_index)
