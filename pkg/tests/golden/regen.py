"""Regenerate the golden files. Only run this after an intentional format change."""

import hashlib
import json
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from rdvk.codec import decode_bytes, encode_sequence  # noqa: E402
from rdvk.entropy import RangeEncoder  # noqa: E402
from synth import make_sequence  # noqa: E402


def entropy_trace(seed, n, n_ctx, p_one):
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(n):
        if rng.random() < 0.1:
            w = int(rng.integers(0, 9))
            ops.append(["bypass", int(rng.integers(0, 1 << w)) if w else 0, w])
        else:
            ops.append(["bit", int(rng.integers(0, n_ctx)), int(rng.random() < p_one)])
    return ops


def encode_trace(ops, n_ctx):
    enc = RangeEncoder(n_ctx)
    for op in ops:
        if op[0] == "bit":
            enc.bit(enc.contexts[op[1]], op[2])
        else:
            enc.bypass(op[1], op[2])
    return enc.finish()


def sequence_hash(seq):
    h = hashlib.sha256()
    for f in seq.frames:
        h.update(f.tobytes())
    return h.hexdigest()


def main():
    vectors = []
    cases = [(0, 0, 1, 0.5), (1, 1, 1, 1.0), (2, 16, 2, 0.5), (3, 200, 4, 0.9),
             (4, 2000, 8, 0.3), (5, 5000, 3, 0.99)]
    for seed, n, n_ctx, p in cases:
        ops = entropy_trace(seed, n, n_ctx, p)
        vectors.append({"n_contexts": n_ctx, "ops": ops, "hex": encode_trace(ops, n_ctx).hex()})
    with open(os.path.join(HERE, "entropy_vectors.json"), "w") as fh:
        json.dump(vectors, fh)

    seq = make_sequence("mixed", 40, 24, 6, seed=7)
    es = encode_sequence(seq, 4, 2, 3)
    with open(os.path.join(HERE, "sample.rdv"), "wb") as fh:
        fh.write(es.data)
    meta = {"sha256_stream": hashlib.sha256(es.data).hexdigest(),
            "sha256_decoded": sequence_hash(decode_bytes(es.data)),
            "source": "synth.make_sequence('mixed', 40, 24, 6, seed=7), ip=4 gop=2 q=3"}
    with open(os.path.join(HERE, "sample.json"), "w") as fh:
        json.dump(meta, fh, indent=2)


if __name__ == "__main__":
    main()
