"""Deterministic synthetic test sequences."""

from fractions import Fraction

import numpy as np

from rdvk.media import Frame, Sequence, chroma_size


def _texture(rng, h, w, smooth=4):
    """Smooth random texture via box-blurred noise, values in [16, 240]."""
    t = rng.random((h + 2 * smooth, w + 2 * smooth))
    k = 2 * smooth + 1
    c = np.cumsum(np.cumsum(np.pad(t, ((1, 0), (1, 0))), 0), 1)
    t = (c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]) / (k * k)
    t = (t - t.min()) / (np.ptp(t) + 1e-12)
    return 16 + 224 * t


def _frame(y, cb, cr, idx):
    h, w = y.shape
    return Frame(w, h, np.clip(np.rint(y), 0, 255).astype(np.uint8),
                 np.clip(np.rint(cb), 0, 255).astype(np.uint8),
                 np.clip(np.rint(cr), 0, 255).astype(np.uint8), idx)


def make_sequence(kind, width=64, height=64, n_frames=9, seed=0, fps=Fraction(25)):
    rng = np.random.default_rng(seed)
    cw, ch = chroma_size(width, height)
    margin = 4 * n_frames + 8
    big = _texture(rng, height + margin, width + margin)
    cbig = _texture(rng, ch + margin, cw + margin, 2)
    frames = []
    for i in range(n_frames):
        if kind == "static":
            y = big[:height, :width]
            cb = cbig[:ch, :cw]
            cr = 255 - cb
        elif kind == "pan":
            dx, dy = 2 * i, i
            y = big[dy:dy + height, dx:dx + width]
            cb = cbig[dy // 2:dy // 2 + ch, dx // 2:dx // 2 + cw]
            cr = 255 - cb
        elif kind == "noise":
            y = rng.integers(0, 256, (height, width)).astype(float)
            cb = rng.integers(0, 256, (ch, cw)).astype(float)
            cr = rng.integers(0, 256, (ch, cw)).astype(float)
        elif kind == "mixed":
            dx = 3 * i
            y = big[:height, dx:dx + width].copy()
            # static lower-left quadrant, moving bright square, noisy strip
            y[height // 2:, :width // 2] = big[height // 2:height, :width // 2]
            sq = min(16, width, max(0, height - 8))
            x0 = (5 * i) % max(1, width - 16)
            y[8:8 + sq, x0:x0 + sq] = 230
            k = min(6, height)
            y[-k:, :] += rng.normal(0, 12, (k, width))
            cb = cbig[:ch, dx // 2:dx // 2 + cw]
            cr = 255 - cb
        else:
            raise ValueError(kind)
        frames.append(_frame(y, cb, cr, i))
    return Sequence(frames, fps, f"{kind}_{width}x{height}_{n_frames}_{seed}")


KINDS = ("static", "pan", "noise", "mixed")


def suite():
    """The 20-sequence suite: every kind at five geometry/length settings."""
    shapes = [(64, 64, 9), (96, 96, 17), (67, 65, 12), (80, 64, 33), (96, 72, 65)]
    out = []
    for k, kind in enumerate(KINDS):
        for j, (w, h, n) in enumerate(shapes):
            if kind == "noise":
                # every sample is new every frame; keep the coding time bounded
                n = min(n, 17 if j > 2 else 9)
            out.append(make_sequence(kind, w, h, n, seed=10 * k + j))
    return out
