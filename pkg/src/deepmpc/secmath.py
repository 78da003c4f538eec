"""Fixed-point functions over secret shares.

Every function takes a backend ``be`` first and works on raw fixed-point
sharings at precision ``be.cfg.f``.  Only backend primitives are used, so
the emulator and the three-party engine run exactly the same circuits.
"""
from __future__ import annotations

import math

import numpy as np

from .quantring import ConfigError
from .rss3 import ArithShare, BinShare, carry_out_public, concat, or_, prefix_generate

# Initial reciprocal approximation w = ALPHA - 2c for c in [0.5, 1).
RECIP_ALPHA = 2.9142
# Goldschmidt iterations after the initial approximation.
DIV_ITERATIONS = 3
# Quadratic approximation of 1/sqrt(u) on [0.25, 0.5].
INVSQRT_COEFFS = (3.14736, -5.77789, 4.63887)
EXP2_TAYLOR_DEGREE = 8
LOG_SERIES_TERMS = 5


def _f(be) -> int:
    return be.cfg.f


def _prod_bits(be) -> int:
    return be.cfg.k + be.cfg.f


def _flatcat(xs):
    return concat([x.reshape(-1) for x in xs])


def _split(x, like):
    out, pos = [], 0
    for y in like:
        out.append(x[pos:pos + y.size].reshape(y.shape))
        pos += y.size
    return out


# ----------------------------------------------------------------------
# truncation and products

def trunc(be, x: ArithShare, total_bits: int, m: int, mode: str | None = None) -> ArithShare:
    """Divide a signed ``total_bits``-bit value by 2^m with rounding.

    ``prob`` follows the Bernoulli rounding rule; ``nearest`` rounds half up
    using a binary shift: bit-decompose x + 2^(m-1) + 2^(total_bits-1),
    drop m bits, convert back and remove the offset.
    """
    mode = mode or be.rounding
    if m == 0:
        return x
    be.op_counts["trunc"] += 1
    if mode == "prob":
        return be.trunc_pr(x, total_bits, m)
    if mode != "nearest":
        raise ConfigError(f"unknown rounding mode {mode!r}")
    if not 0 < m < total_bits <= be.ring.bits:
        raise ConfigError(f"bad truncation parameters total_bits={total_bits}, m={m}")
    y = x.add_public((1 << (m - 1)) + (1 << (total_bits - 1)))
    bits = be.a2b(y, total_bits)
    q = be.b2a(bits >> m)
    return q.add_public(be.ring.mask + 1 - (1 << (total_bits - 1 - m)))


def trunc_many(be, xs, total_bits: int, m: int, mode: str | None = None):
    """Truncate several sharings with a single protocol invocation."""
    if len(xs) == 1:
        return [trunc(be, xs[0], total_bits, m, mode)]
    return _split(trunc(be, _flatcat(xs), total_bits, m, mode), xs)


def fxmul_many(be, pairs, total_bits: int | None = None):
    prods = be.mul_many(pairs)
    return trunc_many(be, prods, total_bits or _prod_bits(be), _f(be))


def fxmul(be, x: ArithShare, y: ArithShare, total_bits: int | None = None) -> ArithShare:
    return fxmul_many(be, [(x, y)], total_bits)[0]


def fxmul_public(be, x: ArithShare, c) -> ArithShare:
    """x * c for a public real c (scalar or array)."""
    raw = be.encode(c)
    return trunc(be, x * raw, _prod_bits(be), _f(be))


def fxmatmul(be, x: ArithShare, y: ArithShare) -> ArithShare:
    """Matrix product with one rounding per output entry."""
    return trunc(be, be.matmul(x, y), _prod_bits(be), _f(be))


# ----------------------------------------------------------------------
# comparison and selection

def ltz(be, x: ArithShare) -> BinShare:
    """[x < 0] from the most significant bit of x."""
    be.op_counts["ltz"] += 1
    n = be.ring.bits
    return be.a2b(x, n).bit(n - 1)


def lt(be, x: ArithShare, y: ArithShare) -> BinShare:
    return ltz(be, x - y)


def mux(be, b, x, y):
    """x if b = 0 else y, computed as x + b (y - x).

    ``b`` is a 1-bit binary share or an already converted 0/1 arithmetic
    share; x and y are sharings or public raw values.
    """
    ba = b if isinstance(b, ArithShare) else be.bit2a(b)
    if isinstance(x, ArithShare) or isinstance(y, ArithShare):
        return be.mul(ba, y - x) + x
    diff = be.ring.wrap(be.ring.cast(y) - be.ring.cast(x))
    return (ba * diff).add_public(x)


def maximum(be, x: ArithShare, y: ArithShare):
    """Elementwise max and the arithmetic indicator [x < y]."""
    c = be.bit2a(lt(be, x, y))
    return x + be.mul(c, y - x), c


# ----------------------------------------------------------------------
# bit-level helpers

def suffix_or(be, bits: BinShare, width: int) -> BinShare:
    """Bit i of the result is the OR of bits i..width-1."""
    o = bits.with_width(width)
    d = 1
    while d < width:
        o = or_(be, o, (o >> d).with_width(width))
        d *= 2
    return o


def msb_onehot(be, bits: BinShare, width: int) -> BinShare:
    """One-hot word marking the most significant set bit (zero if none)."""
    o = suffix_or(be, bits, width)
    return o ^ (o >> 1).with_width(width)


def _bit_index_word(onehot: BinShare, width: int) -> BinShare:
    """Binary index of the set bit of a one-hot word (local)."""
    nbits = max(1, math.ceil(math.log2(width)))
    word = None
    for t in range(nbits):
        par = onehot.parity([i for i in range(width) if (i >> t) & 1])
        par = par.shl(t, nbits)
        word = par if word is None else word ^ par
    return word


def _leading_bit(be, x: ArithShare):
    """One-hot word of the leading bit of positive x, and its width k-1.

    Reversing the word over that width and converting it gives
    R = 2^(W-1-p) for leading-bit position p, so x R lies in [2^(W-1), 2^W).
    """
    W = be.cfg.k - 1
    bits = be.a2b(x, be.cfg.k)
    return msb_onehot(be, bits, W), W


# ----------------------------------------------------------------------
# division

def div(be, a: ArithShare, b: ArithShare, iterations: int | None = None) -> ArithShare:
    """a / b for b > 0 by Goldschmidt iteration.

    b is scaled into c in [0.5, 1) via its leading-bit position, the
    reciprocal is approximated by 2.9142 - 2c and refined with
    y <- y (1 + e), e <- e^2.  The result for b <= 0 is undefined.
    """
    be.op_counts["div"] += 1
    f = _f(be)
    it = DIV_ITERATIONS if iterations is None else iterations
    oh, W = _leading_bit(be, b)
    R = be.b2a(oh.reverse(W))
    c = trunc(be, be.mul(b, R), W + 1, W - f)
    w0 = (-(c << 1)).add_public(be.encode(RECIP_ALPHA))
    w = trunc(be, be.mul(w0, R), f + W + 1, W - f)
    y, bw = fxmul_many(be, [(a, w), (b, w)])
    e = (-bw).add_public(1 << f)
    for i in range(it):
        one_e = e.add_public(1 << f)
        if i == it - 1:
            y = fxmul(be, y, one_e)
        else:
            y, e = fxmul_many(be, [(y, one_e), (e, e)])
    return y


# ----------------------------------------------------------------------
# exponentiation

def _power_table(be, x: ArithShare, degree: int) -> list[ArithShare]:
    """[x, x^2, ..., x^degree] computed in logarithmic depth."""
    powers = {1: x}
    have = 1
    while have < degree:
        pairs, targets = [], []
        for j in range(1, have + 1):
            t = have + j
            if t > degree:
                break
            pairs.append((powers[have], powers[j]))
            targets.append(t)
        for t, v in zip(targets, fxmul_many(be, pairs)):
            powers[t] = v
        have = max(targets)
    return [powers[i] for i in range(1, degree + 1)]


def poly_eval(be, x: ArithShare, coeffs, powers=None) -> ArithShare:
    """sum_i coeffs[i] x^i with a single rounding of the weighted sum."""
    f = _f(be)
    degree = len(coeffs) - 1
    if powers is None:
        powers = _power_table(be, x, degree)
    acc = None
    for i in range(1, degree + 1):
        term = powers[i - 1] * be.encode(coeffs[i])
        acc = term if acc is None else acc + term
    out = trunc(be, acc, _prod_bits(be) + 4, f)
    return out.add_public(be.encode(coeffs[0]))


def _exp2_coeffs(degree: int) -> list[float]:
    ln2 = math.log(2.0)
    return [ln2 ** i / math.factorial(i) for i in range(degree + 1)]


def exp2(be, x: ArithShare) -> ArithShare:
    """2^x for x < k-f-1 (no lower bound).

    Bits f..f+l-1 of x give the integer part y mod 2^l, the low f bits the
    fraction r.  The result is 2^r * 2^y.  For negative x this is
    2^(x + 2^l), which a shift by 2^l bits turns into 2^x without a
    division.  Inputs below -(k-f-1) return 0.
    """
    be.op_counts["exp2"] += 1
    cfg = be.cfg
    f, k, ell = cfg.f, cfg.k, cfg.ell
    bits = be.a2b(x, k)
    # z = [x < -(k-f-1)]: flip the sign bit and compare as unsigned words
    thresh = (-(k - f - 1) << f) + (1 << (k - 1))
    flipped = bits ^ (1 << (k - 1))
    ge = carry_out_public(be, flipped, (1 << k) - thresh, k)
    z = ~ge
    sel = [bits.bit(f + j) for j in range(ell)] + [bits.bit(k - 1), z]
    conv = be.bit2a(concat([s.expand_dims(0) for s in sel], axis=0))
    factors = [conv[j] * ((1 << (1 << j)) - 1) + 1 for j in range(ell)]
    while len(factors) > 1:
        pairs = [(factors[i], factors[i + 1]) for i in range(0, len(factors) - 1, 2)]
        prods = be.mul_many(pairs)
        if len(factors) % 2:
            prods.append(factors[-1])
        factors = prods
    d = factors[0]
    r = be.b2a(bits.with_width(f))
    u = poly_eval(be, r, _exp2_coeffs(EXP2_TAYLOR_DEGREE))
    g = be.mul(u, d)
    shift = 1 << ell
    g2 = trunc(be, g, f + shift + 1, shift)
    h = g + be.mul(conv[ell], g2 - g)
    return h - be.mul(conv[ell + 1], h)


LOG2_E = 1.0 / math.log(2.0)


def exp_e(be, x: ArithShare) -> ArithShare:
    return exp2(be, fxmul_public(be, x, LOG2_E))


# ----------------------------------------------------------------------
# logarithm

def log2(be, x: ArithShare) -> ArithShare:
    """log2(x) for x > 0 as log2(a) + b with x = a 2^b, a in [0.5, 1).

    log2(a) uses the odd series of 2 atanh((a-1)/(a+1)).
    """
    be.op_counts["log2"] += 1
    f = _f(be)
    oh, W = _leading_bit(be, x)
    idx = _bit_index_word(oh, W)
    both = be.b2a(concat([oh.reverse(W).expand_dims(0), idx.with_width(W).expand_dims(0)], axis=0))
    R, p = both[0], both[1]
    a = trunc(be, be.mul(x, R), W + 1, W - f)
    t = div(be, a.add_public(-(1 << f) & be.ring.mask), a.add_public(1 << f))
    coeffs = [0.0] * (2 * LOG_SERIES_TERMS)
    for j in range(LOG_SERIES_TERMS):
        coeffs[2 * j + 1] = 2.0 * LOG2_E / (2 * j + 1)
    la = poly_eval(be, t, coeffs)
    return la + (p << f).add_public(((1 - f) << f) & be.ring.mask)


def ln(be, x: ArithShare) -> ArithShare:
    return fxmul_public(be, log2(be, x), math.log(2.0))


# ----------------------------------------------------------------------
# inverse square root

def np2(be, x: ArithShare) -> BinShare:
    """One-hot word with its bit at e + f where 2^(e-1) < x <= 2^e.

    The index is the bit length of x_raw - 1: bit-decompose, prefix-OR
    toward the low end, and take the difference of neighbouring bits.
    """
    k = be.cfg.k
    bits = be.a2b(x.add_public(be.ring.mask), k)
    o = suffix_or(be, bits, k)
    return o.shl(1, k) ^ 1 ^ o


# Square-root compensation constants 2^(f/2) and 2^((f+1)/2) at precision f.
def _comp_constants(f: int) -> tuple[float, float]:
    return 2.0 ** (f / 2), 2.0 ** ((f + 1) / 2)


def invert_sqrt(be, x: ArithShare) -> ArithShare:
    """1/sqrt(x) for 2^(1-f) <= x < 2^(k-f-1).

    Separation: with z = np2(x) at index e+f, the bit-reversed z converts to
    2^(-1-e), giving u = x 2^(-1-e) in (0.25, 0.5] and c(u) ~ 1/sqrt(u).
    Compensation: pairing neighbouring bits of z gives e' = floor((e+f)/2);
    the reversed pairs convert to 2^(-1-e'), and the parity of e+f selects
    the constant restoring 2^(-(e+1)/2).
    """
    be.op_counts["invert_sqrt"] += 1
    f, k = _f(be), be.cfg.k
    z = np2(be, x)
    half = (2 * f + 1) // 2
    pair = (z & _alternating(2 * f, 0)) ^ ((z >> 1) & _alternating(2 * f, 0))
    a = pair.gather([2 * i for i in range(half)])
    b = z.parity(list(range(0, k, 2)))
    Rz_Ra = be.b2a(concat([z.reverse(2 * f).expand_dims(0), a.reverse(half).with_width(2 * f).expand_dims(0)], axis=0))
    bb = be.bit2a(b)
    Rz, Ra = Rz_Ra[0], Rz_Ra[1]
    u = fxmul(be, x, Rz)
    c0, c1, c2 = INVSQRT_COEFFS
    inner = fxmul_public(be, u, c2).add_public(be.encode(c1))
    c = fxmul(be, u, inner).add_public(be.encode(c0))
    lo, hi = _comp_constants(f)
    lo_raw, hi_raw = int(be.encode(lo)), int(be.encode(hi))
    cb = (bb * ((hi_raw - lo_raw) & be.ring.mask)).add_public(lo_raw)
    Wfac = fxmul(be, Ra, cb)
    return fxmul(be, c, Wfac)


def _alternating(width: int, start: int) -> int:
    return sum(1 << i for i in range(start, width, 2))


# ----------------------------------------------------------------------
# randomness

def rand_fraction(be, shape, e: int = 0) -> ArithShare:
    """Uniform on [0, 2^e) at precision f from f + e random bits."""
    f = _f(be)
    if f + e > be.cfg.k:
        raise ConfigError("need f + e <= k")
    w = f + e
    if w <= 0:
        return be.zeros(shape)
    return be.b2a(be.rand_bin(shape, w))


def bernoulli(be, p: float, shape) -> ArithShare:
    """0/1 integer sharing with mean p, as floor(p + r) for uniform r."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    f = _f(be)
    P = int(math.floor(p * (1 << f) + 0.5))
    if P <= 0:
        return be.zeros(shape)
    if P >= 1 << f:
        return be.public(1, shape)
    r = be.rand_bin(shape, f)
    return be.bit2a(carry_out_public(be, r, P, f))
