"""Block motion estimation, bi-directional compensation and motion coding.

Motion is estimated per 16x16 luma block by exhaustive integer-pel search
(+-16) with the SAD criterion.  Reference samples outside the picture are
clamped to the border, both during search and during compensation.

``beta`` is the weight on the past prediction, one of 0, 1/2, 1 per block.
A vector that does not contribute to the prediction (the future vector when
beta == 1, the past vector when beta == 0) is stored and coded as (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .entropy import code_seg0
from .errors import BitstreamError, DimensionError
from .media import Frame, chroma_size

BLOCK = 16
SEARCH = 16
BETAS = (1.0, 0.5, 0.0)  # tie-break order

# context layout inside a frame session
CTX_MV_NONZERO = 0  # + list (0 past, 1 future)
CTX_MV_X = 2  # 4 prefix contexts
CTX_MV_Y = 6  # 4 prefix contexts
CTX_BETA = 10  # 2 contexts
MOTION_CONTEXTS = 12


def _search_order():
    offs = [(dx, dy) for dy in range(-SEARCH, SEARCH + 1) for dx in range(-SEARCH, SEARCH + 1)]
    offs.sort(key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]))
    n = 2 * SEARCH + 1
    flat = np.array([(dy + SEARCH) * n + (dx + SEARCH) for dx, dy in offs])
    return np.array(offs), flat


SEARCH_OFFSETS, _SEARCH_FLAT = _search_order()


def grid_shape(width, height):
    return -(-height // BLOCK), -(-width // BLOCK)


def pad_plane(plane, rows, cols):
    h, w = plane.shape
    return np.pad(plane, ((0, rows - h), (0, cols - w)), mode="edge")


@dataclass
class MotionField:
    """Per-block vectors as (dx, dy) int arrays of shape (rows, cols, 2)."""

    mv_past: np.ndarray
    mv_future: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    block_size: int = BLOCK

    def __post_init__(self):
        self.mv_past = np.asarray(self.mv_past, dtype=np.int32)
        if self.beta is None:
            self.beta = np.ones(self.mv_past.shape[:2])
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.mv_future is not None:
            self.mv_future = np.asarray(self.mv_future, dtype=np.int32)

    @property
    def shape(self):
        return self.mv_past.shape[:2]

    @property
    def bidirectional(self):
        return self.mv_future is not None

    @property
    def is_zero(self):
        """Zero vectors and beta == 1 everywhere: prediction is the past reference."""
        return not self.mv_past.any() and bool((self.beta == 1.0).all()) and (
            not self.bidirectional or not self.mv_future.any()
        )

    def __eq__(self, other):
        if not isinstance(other, MotionField):
            return NotImplemented
        if self.bidirectional != other.bidirectional:
            return False
        return (
            np.array_equal(self.mv_past, other.mv_past)
            and np.array_equal(self.beta, other.beta)
            and (not self.bidirectional or np.array_equal(self.mv_future, other.mv_future))
        )

    def to_json(self):
        d = {"mv_past": self.mv_past.tolist(), "beta": self.beta.tolist()}
        if self.bidirectional:
            d["mv_future"] = self.mv_future.tolist()
        return d


def _block_sum_matrix(n_blocks):
    return np.kron(np.eye(n_blocks, dtype=np.float32), np.ones((BLOCK, 1), np.float32))


def _sad_volume(target, ref):
    """SAD of every 16x16 block for every offset: shape (33*33, rows, cols).

    Block sums are 0/1 matrix products in float32; every partial sum is an
    integer below 2**24, so the result is exact.
    """
    H, W = target.shape
    rows, cols = H // BLOCK, W // BLOCK
    n = 2 * SEARCH + 1
    R = np.pad(ref, SEARCH, mode="edge").astype(np.float32)
    shifted = np.ascontiguousarray(sliding_window_view(R, W, axis=1))  # (H+2S, n, W)
    t = target.astype(np.float32)[:, None, :]
    sx = _block_sum_matrix(cols)
    sy = _block_sum_matrix(rows).T
    out = np.empty((n, rows, n, cols), np.float32)
    for j in range(n):  # vertical offset j - SEARCH
        d = np.abs(shifted[j:j + H] - t)
        s = (d.reshape(H * n, W) @ sx).reshape(H, n * cols)
        out[j] = (sy @ s).reshape(rows, n, cols)
    # out[dy, row, dx, col] -> (dy*n + dx, row, col)
    return out.transpose(0, 2, 1, 3).reshape(n * n, rows, cols).astype(np.int32)


def _best_vectors(target, ref):
    sad = _sad_volume(target, ref)[_SEARCH_FLAT]
    best = np.argmin(sad, axis=0)
    return SEARCH_OFFSETS[best]


def _block_index(H, W):
    return np.arange(H)[:, None] // BLOCK, np.arange(W)[None, :] // BLOCK


def _shift_plane(ref, mv, H, W, scale):
    """Motion-compensated plane of size HxW from ``ref`` with clamped borders.

    ``scale`` is 1 for luma, 2 for chroma (vectors halved, round half even,
    blocks of 8).
    """
    h, w = ref.shape
    bs = BLOCK // scale
    vec = mv if scale == 1 else np.rint(mv / 2.0).astype(np.int32)
    by = np.arange(H)[:, None] // bs
    bx = np.arange(W)[None, :] // bs
    ys = np.clip(np.arange(H)[:, None] + vec[by, bx, 1], 0, h - 1)
    xs = np.clip(np.arange(W)[None, :] + vec[by, bx, 0], 0, w - 1)
    return ref[ys, xs]


def blend(past, future, beta_map):
    """Round-half-even blend; ``beta_map`` is per-sample weight on ``past``."""
    if future is None:
        return past.copy()
    p = past.astype(np.float64)
    f = future.astype(np.float64)
    return np.rint(beta_map * p + (1.0 - beta_map) * f).astype(np.uint8)


def predict_planes(field, ref_past, ref_future, H, W):
    """Prediction planes (Y, Cb, Cr) on an HxW luma grid (multiple of 16)."""
    planes = []
    for idx, scale in ((0, 1), (1, 2), (2, 2)):
        h, w = H // scale, W // scale
        bs = BLOCK // scale
        p = _shift_plane(ref_past.planes[idx], field.mv_past, h, w, scale)
        if ref_future is None:
            planes.append(p)
            continue
        f = _shift_plane(ref_future.planes[idx], field.mv_future, h, w, scale)
        bmap = np.repeat(np.repeat(field.beta, bs, axis=0), bs, axis=1)
        planes.append(blend(p, f, bmap))
    return planes


def estimate_motion(target: Frame, ref_past: Frame, ref_future: Optional[Frame] = None) -> MotionField:
    for ref in (ref_past, ref_future):
        if ref is not None and (ref.width, ref.height) != (target.width, target.height):
            raise DimensionError("reference geometry differs from target")
    rows, cols = grid_shape(target.width, target.height)
    H, W = rows * BLOCK, cols * BLOCK
    tgt = pad_plane(target.y, H, W)
    mv_p = _best_vectors(tgt, pad_plane(ref_past.y, H, W))
    if ref_future is None:
        return MotionField(mv_p)
    mv_f = _best_vectors(tgt, pad_plane(ref_future.y, H, W))

    p = _shift_plane(ref_past.y, mv_p, H, W, 1).astype(np.float64)
    f = _shift_plane(ref_future.y, mv_f, H, W, 1).astype(np.float64)
    t = tgt.astype(np.float64)
    sads = []
    for b in BETAS:
        pred = np.rint(b * p + (1.0 - b) * f)
        sads.append(np.abs(t - pred).reshape(rows, BLOCK, cols, BLOCK).sum(axis=(1, 3)))
    choice = np.argmin(np.stack(sads), axis=0)
    beta = np.array(BETAS)[choice]
    mv_p[beta == 0.0] = 0
    mv_f[beta == 1.0] = 0
    return MotionField(mv_p, mv_f, beta)


def compensate(field: MotionField, ref_past: Frame, ref_future: Optional[Frame] = None) -> Frame:
    if field.bidirectional != (ref_future is not None):
        raise DimensionError("motion field and reference count disagree")
    rows, cols = field.shape
    y, cb, cr = predict_planes(field, ref_past, ref_future, rows * BLOCK, cols * BLOCK)
    w, h = ref_past.width, ref_past.height
    cw, ch = chroma_size(w, h)
    return Frame(w, h, y[:h, :w], cb[:ch, :cw], cr[:ch, :cw], ref_past.display_index)


def _median3(a, b, c):
    return max(min(a, b), min(max(a, b), c))


def _predictor(mv, r, c, cols):
    left = mv[r][c - 1] if c > 0 else (0, 0)
    top = mv[r - 1][c] if r > 0 else (0, 0)
    topright = mv[r - 1][c + 1] if r > 0 and c + 1 < cols else (0, 0)
    return (
        _median3(left[0], top[0], topright[0]),
        _median3(left[1], top[1], topright[1]),
    )


def _code_vector(session, ctxs, lst, mv, r, c, cols, value=None):
    nz_ctx = ctxs[CTX_MV_NONZERO + lst]
    xctx = ctxs[CTX_MV_X:CTX_MV_X + 4]
    yctx = ctxs[CTX_MV_Y:CTX_MV_Y + 4]
    px, py = _predictor(mv, r, c, cols)
    if session.decoding:
        if not session.bit(nz_ctx):
            return (px, py)
        vx = px + code_seg0(session, xctx)
        vy = py + code_seg0(session, yctx)
        if abs(vx) > SEARCH or abs(vy) > SEARCH:
            raise BitstreamError(f"motion vector ({vx}, {vy}) outside search range")
        return (vx, vy)
    dx, dy = value[0] - px, value[1] - py
    if session.bit(nz_ctx, int(dx != 0 or dy != 0)):
        code_seg0(session, xctx, dx)
        code_seg0(session, yctx, dy)
    return value


def code_motion(session, field: Optional[MotionField] = None, shape=None, bidirectional=False):
    """Encode ``field`` or (decoding) read a field of ``shape`` blocks.

    Returns ``(field, bits)`` where ``bits`` is the information content spent.
    """
    start = getattr(session, "cost", 0)
    ctxs = session.contexts
    if not session.decoding:
        shape = field.shape
        bidirectional = field.bidirectional
    rows, cols = shape
    lists = [[[(0, 0)] * cols for _ in range(rows)] for _ in range(2 if bidirectional else 1)]
    betas = [[1.0] * cols for _ in range(rows)]
    for r in range(rows):
        for c in range(cols):
            beta = 1.0
            if bidirectional:
                if session.decoding:
                    beta = 1.0
                    if session.bit(ctxs[CTX_BETA]):
                        beta = 0.0 if session.bit(ctxs[CTX_BETA + 1]) else 0.5
                else:
                    beta = float(field.beta[r, c])
                    if session.bit(ctxs[CTX_BETA], int(beta != 1.0)):
                        session.bit(ctxs[CTX_BETA + 1], int(beta == 0.0))
            betas[r][c] = beta
            if beta != 0.0:
                v = None if session.decoding else tuple(int(x) for x in field.mv_past[r, c])
                lists[0][r][c] = _code_vector(session, ctxs, 0, lists[0], r, c, cols, v)
            if bidirectional and beta != 1.0:
                v = None if session.decoding else tuple(int(x) for x in field.mv_future[r, c])
                lists[1][r][c] = _code_vector(session, ctxs, 1, lists[1], r, c, cols, v)
    if session.decoding:
        field = MotionField(
            np.array(lists[0], dtype=np.int32).reshape(rows, cols, 2),
            np.array(lists[1], dtype=np.int32).reshape(rows, cols, 2) if bidirectional else None,
            np.array(betas) if bidirectional else None,
        )
    bits = (getattr(session, "cost", 0) - start) / (1 << 15)
    return field, bits
