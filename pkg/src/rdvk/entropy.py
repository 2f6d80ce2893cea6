"""Binary range coder with integer-only adaptive contexts.

Everything here is integer arithmetic, so the byte stream is a pure function
of the (context, bit) trace on every platform.

Coder layout (32-bit registers, LZMA-style carry handling):

* ``range`` stays in ``[2**24, 2**32)`` after renormalisation.
* A context with 12-bit probability ``p`` (probability of a 1) gives the
  symbol ``1`` the lower ``(range >> 12) * p`` part of the interval.
* Carries are resolved with a one-byte cache plus a counter of pending
  ``0xFF`` bytes; the always-zero leading byte of the classic scheme is not
  written.
* ``finish`` emits only as many bytes of the final ``low`` as are needed to
  pin a value inside the interval.  The decoder pads the missing tail with
  at most four zero bytes.

Context adaptation keeps a 24-bit probability state and moves it towards
the coded bit by ``1 / (n + 2)`` where ``n`` is the number of updates seen
so far, capped at :data:`WINDOW`.  For the first symbols this is exactly
the Krichevsky-Trofimov estimator, afterwards an exponential window of about
a thousand symbols.
"""

import math

from .errors import BitstreamError

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
STATE_BITS = 24
WINDOW = 1023
# state clamp keeps the 12-bit probability in [1, 4095]
STATE_MIN = 1 << (STATE_BITS - PROB_BITS)
STATE_MAX = (1 << STATE_BITS) - STATE_MIN

TOP = 1 << 24
MAX_PAD = 4

COST_SCALE = 1 << 15
# COST[p] = information content of a symbol coded with probability p/4096,
# in 1/32768 bit units.
COST = [0] + [round(-math.log2(p / PROB_ONE) * COST_SCALE) for p in range(1, PROB_ONE)]


class BinaryContext:
    """Adaptive probability of a binary symbol being 1."""

    __slots__ = ("state", "count")

    def __init__(self, state=1 << (STATE_BITS - 1), count=0):
        self.state = state
        self.count = count

    @property
    def p(self):
        """12-bit probability of a 1, always in [1, 4095]."""
        return self.state >> (STATE_BITS - PROB_BITS)

    def update(self, bit):
        st = self.state
        n = self.count
        st += ((bit << STATE_BITS) - st) // (n + 2)
        if st < STATE_MIN:
            st = STATE_MIN
        elif st > STATE_MAX:
            st = STATE_MAX
        self.state = st
        if n < WINDOW:
            self.count = n + 1

    def __repr__(self):
        return f"BinaryContext(p={self.p}, count={self.count})"


def new_contexts(n):
    return [BinaryContext() for _ in range(n)]


def snapshot(contexts):
    return [(c.state, c.count) for c in contexts]


def restore(contexts, snap):
    for c, (st, n) in zip(contexts, snap):
        c.state = st
        c.count = n


class RangeEncoder:
    """Encoding session. ``bit``/``bypass`` return the value they were given."""

    decoding = False

    def __init__(self, n_contexts=0, contexts=None):
        self.contexts = contexts if contexts is not None else new_contexts(n_contexts)
        self.low = 0
        self.range = 0xFFFFFFFF
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self._symbols = 0
        self._result = None
        self.cost = 0

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > 0xFFFFFFFF:
            carry = low >> 32
            out = self._out
            out.append((self._cache + carry) & 0xFF)
            if self._cache_size > 1:
                out.extend(bytes(((0xFF + carry) & 0xFF,)) * (self._cache_size - 1))
            self._cache_size = 0
            self._cache = (low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def bit(self, ctx, bit):
        st = ctx.state
        p = st >> 12
        bound = (self.range >> 12) * p
        if bit:
            self.range = bound
            self.cost += COST[p]
        else:
            self.low += bound
            self.range -= bound
            self.cost += COST[PROB_ONE - p]
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()
        n = ctx.count
        st += ((bit << 24) - st) // (n + 2)
        if st < STATE_MIN:
            st = STATE_MIN
        elif st > STATE_MAX:
            st = STATE_MAX
        ctx.state = st
        if n < WINDOW:
            ctx.count = n + 1
        self._symbols += 1
        return bit

    def bypass(self, value, width):
        for i in range(width - 1, -1, -1):
            self.range >>= 1
            if (value >> i) & 1:
                self.low += self.range
            while self.range < TOP:
                self.range <<= 8
                self._shift_low()
        self.cost += width * COST_SCALE
        self._symbols += width
        return value

    @property
    def bits_written(self):
        """Ideal information content coded so far, in bits (float)."""
        return self.cost / COST_SCALE

    def finish(self):
        """Flush the coder and return the payload bytes. Idempotent."""
        if self._result is not None:
            return self._result
        low, rng = self.low, self.range
        emitted = len(self._out) + self._cache_size - 1
        kmin = 1 if (emitted == 0 and self._symbols) else 0
        for k in range(kmin, 5):
            m = 32 - 8 * k
            v = ((low + (1 << m) - 1) >> m) << m
            if v < low + rng:
                break
        self.low = v
        for _ in range(k):
            self._shift_low()
        carry = self.low >> 32
        self._out.append((self._cache + carry) & 0xFF)
        if self._cache_size > 1:
            self._out.extend(bytes(((0xFF + carry) & 0xFF,)) * (self._cache_size - 1))
        assert self._out[0] == 0
        self._result = bytes(self._out[1:])
        return self._result


class RangeDecoder:
    """Decoding session over one self-terminated payload."""

    decoding = True

    def __init__(self, data, n_contexts=0, contexts=None):
        self.contexts = contexts if contexts is not None else new_contexts(n_contexts)
        self._data = bytes(data)
        self._pos = 0
        self._pad = 0
        self.range = 0xFFFFFFFF
        self.code = None
        if self._data:
            code = 0
            for _ in range(4):
                code = (code << 8) | self._next_byte()
            if code >= self.range:
                raise BitstreamError("invalid range coder start value")
            self.code = code

    @property
    def empty(self):
        return not self._data

    def _next_byte(self):
        pos = self._pos
        if pos < len(self._data):
            self._pos = pos + 1
            return self._data[pos]
        self._pad += 1
        if self._pad > MAX_PAD:
            raise BitstreamError("range decoder ran past end of payload")
        return 0

    def bit(self, ctx, bit=None):
        code = self.code
        if code is None:
            raise BitstreamError("empty payload")
        st = ctx.state
        bound = (self.range >> 12) * (st >> 12)
        if code < bound:
            self.range = bound
            bit = 1
        else:
            code -= bound
            self.range -= bound
            bit = 0
        while self.range < TOP:
            self.range <<= 8
            code = (code << 8) | self._next_byte()
        self.code = code
        n = ctx.count
        st += ((bit << 24) - st) // (n + 2)
        if st < STATE_MIN:
            st = STATE_MIN
        elif st > STATE_MAX:
            st = STATE_MAX
        ctx.state = st
        if n < WINDOW:
            ctx.count = n + 1
        return bit

    def bypass(self, value=None, width=0):
        if width and self.code is None:
            raise BitstreamError("empty payload")
        value = 0
        for _ in range(width):
            self.range >>= 1
            b = 0
            if self.code >= self.range:
                self.code -= self.range
                b = 1
            value = (value << 1) | b
            while self.range < TOP:
                self.range <<= 8
                self.code = (self.code << 8) | self._next_byte()
        return value

    def finish(self):
        """Check that the whole payload was consumed."""
        if self._pos < len(self._data):
            raise BitstreamError(
                f"{len(self._data) - self._pos} unread bytes at end of payload"
            )


class BitCounter:
    """Encoder stand-in that only accumulates information content.

    Used for trial encodes: it updates contexts exactly like the real
    encoder, so callers snapshot/restore the context table around it.
    """

    decoding = False

    def __init__(self, contexts):
        self.contexts = contexts
        self.cost = 0

    def bit(self, ctx, bit):
        st = ctx.state
        p = st >> 12
        self.cost += COST[p] if bit else COST[PROB_ONE - p]
        n = ctx.count
        st += ((bit << 24) - st) // (n + 2)
        if st < STATE_MIN:
            st = STATE_MIN
        elif st > STATE_MAX:
            st = STATE_MAX
        ctx.state = st
        if n < WINDOW:
            ctx.count = n + 1
        return bit

    def bypass(self, value, width):
        self.cost += width * COST_SCALE
        return value

    @property
    def bits_written(self):
        return self.cost / COST_SCALE


def bit_cost(ctx, bit):
    """Cost in 1/32768 bits of coding ``bit`` with ``ctx`` (no update)."""
    p = ctx.state >> 12
    return COST[p] if bit else COST[PROB_ONE - p]


# Functional surface mirroring the session methods.

def encode_bit(ctx, bit, session):
    session.bit(ctx, bit)


def decode_bit(ctx, session):
    return session.bit(ctx)


def encode_bypass(value, width, session):
    if value < 0 or value >> width:
        raise ValueError(f"value {value} does not fit in {width} bits")
    session.bypass(value, width)


def decode_bypass(width, session):
    return session.bypass(None, width)


# Binarisations shared by the motion and residual coders.

MAX_EG_PREFIX = 24


def code_ueg0(session, ctxs, value=None):
    """Unsigned exp-Golomb (k=0): context-coded unary prefix, bypass suffix.

    ``ctxs`` is a list of contexts; prefix bin ``i`` uses ``ctxs[min(i, -1)]``.
    """
    last = len(ctxs) - 1
    if session.decoding:
        n = 0
        while session.bit(ctxs[n if n < last else last]):
            n += 1
            if n > MAX_EG_PREFIX:
                raise BitstreamError("exp-Golomb prefix too long")
        return (1 << n) - 1 + session.bypass(None, n)
    n = (value + 1).bit_length() - 1
    for i in range(n):
        session.bit(ctxs[i if i < last else last], 1)
    session.bit(ctxs[n if n < last else last], 0)
    session.bypass(value + 1 - (1 << n), n)
    return value


def code_seg0(session, ctxs, value=None):
    """Signed exp-Golomb: v > 0 maps to 2v - 1, v <= 0 to -2v."""
    if session.decoding:
        k = code_ueg0(session, ctxs)
        return (k + 1) >> 1 if k & 1 else -(k >> 1)
    code_ueg0(session, ctxs, 2 * value - 1 if value > 0 else -2 * value)
    return value
