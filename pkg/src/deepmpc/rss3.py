"""Replicated secret sharing among three semi-honest parties.

A secret x in Z_{2^64} is split as x = x_0 + x_1 + x_2 and party P_i holds
the pair (x_{i-1}, x_{i+1}), stored as ``parts = (prev, next)``.  Binary
sharings work the same way with XOR, over packed words of ``width`` bits.

The share classes only know how to do local (communication-free) work.
The ``Engine`` implements the interactive protocols for one party on top
of a ``transport.Session``.  The cleartext emulator reuses the same share
classes with a single part, so code written against the common backend
surface runs unchanged on both.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantring import RING64, ConfigError, Ring, to_ring, wraparound
from .transport import Session

# Minimum statistical slack (in bits) for mask-and-open truncation.
MIN_TRUNC_SLACK = 8
# Mask components drawn for truncation are this many bits wide.
TRUNC_MASK_BITS = 62


def _width_mask(width: int) -> int:
    return (1 << width) - 1


def _as_public(ring: Ring, c):
    if isinstance(c, (ArithShare, BinShare)):
        raise TypeError("expected a public operand")
    if isinstance(c, (int, np.integer)):
        return int(c) & ring.mask
    arr = np.asarray(c)
    if arr.dtype.kind == "f":
        raise TypeError("public operands must be integers (raw ring values)")
    return ring.cast(arr)


@wraparound
class _Shared:
    """Local structure shared by arithmetic and binary shares."""

    __slots__ = ("parts", "ring", "slot")

    def _new(self, parts):
        raise NotImplementedError

    @property
    def shape(self) -> tuple:
        return self.parts[0].shape

    @property
    def ndim(self) -> int:
        return self.parts[0].ndim

    @property
    def size(self) -> int:
        return self.parts[0].size

    def __len__(self) -> int:
        return len(self.parts[0])

    def map(self, fn):
        """Apply the same index-only transformation to every part."""
        return self._new(tuple(fn(p) for p in self.parts))

    def __getitem__(self, idx):
        return self.map(lambda p: p[idx])

    def reshape(self, *shape):
        return self.map(lambda p: p.reshape(*shape))

    def ravel(self):
        return self.map(np.ravel)

    def transpose(self, *axes):
        return self.map(lambda p: p.transpose(*axes))

    @property
    def T(self):
        return self.map(lambda p: p.T)

    def broadcast_to(self, shape):
        return self.map(lambda p: np.broadcast_to(p, shape).copy())

    def expand_dims(self, axis):
        return self.map(lambda p: np.expand_dims(p, axis))

    def copy(self):
        return self.map(np.copy)


@wraparound
class ArithShare(_Shared):
    """One party's view of an arithmetic sharing (any array shape).

    ``slot`` names the part that stores component 0, which is where public
    constants are added (None if this party does not hold component 0).
    """

    __slots__ = ()

    def __init__(self, parts, ring: Ring = RING64, slot: int | None = None):
        self.parts = tuple(parts)
        self.ring = ring
        self.slot = slot

    def _new(self, parts):
        return ArithShare(parts, self.ring, self.slot)

    def __repr__(self) -> str:
        return f"ArithShare(shape={self.shape}, parts={len(self.parts)})"

    def add_public(self, c):
        c = _as_public(self.ring, c)
        shape = np.broadcast_shapes(self.shape, np.shape(c))
        parts = []
        for j, p in enumerate(self.parts):
            if j == self.slot:
                parts.append(self.ring.wrap(p + c))
            else:
                parts.append(np.broadcast_to(p, shape) if p.shape != shape else p)
        return self._new(parts)

    def __add__(self, other):
        if isinstance(other, ArithShare):
            return self._new(tuple(self.ring.wrap(a + b) for a, b in zip(self.parts, other.parts)))
        return self.add_public(other)

    __radd__ = __add__

    def __neg__(self):
        return self._new(tuple(self.ring.wrap(-p) if not self.ring.native else np.negative(p) for p in self.parts))

    def __sub__(self, other):
        if isinstance(other, ArithShare):
            return self._new(tuple(self.ring.wrap(a - b) for a, b in zip(self.parts, other.parts)))
        return self.add_public(_neg_public(self.ring, _as_public(self.ring, other)))

    def __rsub__(self, other):
        return (-self).add_public(other)

    def __mul__(self, c):
        """Multiplication by a public integer (or integer array)."""
        if isinstance(c, ArithShare):
            raise TypeError("share * share needs communication; use the backend's mul")
        c = _as_public(self.ring, c)
        return self._new(tuple(self.ring.wrap(p * c) for p in self.parts))

    __rmul__ = __mul__

    def __lshift__(self, n: int):
        return self * (1 << n)

    def sum(self, axis=None, keepdims: bool = False):
        if self.ring.native:
            return self.map(lambda p: p.sum(axis=axis, keepdims=keepdims, dtype=np.uint64))
        return self.map(lambda p: np.asarray(p.sum(axis=axis, keepdims=keepdims)) & self.ring.mask)


def _neg_public(ring: Ring, c):
    if isinstance(c, int):
        return (-c) & ring.mask
    return np.negative(c) if ring.native else (-c) & ring.mask


@wraparound
class BinShare(_Shared):
    """One party's view of a binary sharing of ``width``-bit words."""

    __slots__ = ("width",)

    def __init__(self, parts, width: int, ring: Ring = RING64, slot: int | None = None):
        self.parts = tuple(parts)
        self.width = width
        self.ring = ring
        self.slot = slot

    def _new(self, parts, width: int | None = None):
        return BinShare(parts, self.width if width is None else width, self.ring, self.slot)

    def __repr__(self) -> str:
        return f"BinShare(shape={self.shape}, width={self.width})"

    @property
    def wmask(self) -> int:
        return _width_mask(self.width)

    def xor_public(self, c):
        c = _as_public(self.ring, c) & self.wmask if isinstance(c, int) else _as_public(self.ring, c) & self.wmask
        shape = np.broadcast_shapes(self.shape, np.shape(c))
        parts = []
        for j, p in enumerate(self.parts):
            if j == self.slot:
                parts.append(p ^ c)
            else:
                parts.append(np.broadcast_to(p, shape) if p.shape != shape else p)
        return self._new(parts)

    def __xor__(self, other):
        if isinstance(other, BinShare):
            return self._new(tuple(a ^ b for a, b in zip(self.parts, other.parts)), max(self.width, other.width))
        return self.xor_public(other)

    __rxor__ = __xor__

    def __and__(self, c):
        """AND with a public mask."""
        if isinstance(c, BinShare):
            raise TypeError("share & share needs communication; use the backend's and_")
        c = _as_public(self.ring, c)
        return self._new(tuple(p & c for p in self.parts))

    __rand__ = __and__

    def __invert__(self):
        return self.xor_public(self.wmask)

    def __rshift__(self, n: int):
        return self._new(tuple(p >> n for p in self.parts), max(self.width - n, 1))

    def shl(self, n: int, width: int | None = None):
        """Shift left by n, keeping (or setting) the word width."""
        w = self.width if width is None else width
        m = _width_mask(w)
        return self._new(tuple((p << n) & m for p in self.parts), w)

    def __lshift__(self, n: int):
        return self.shl(n)

    def with_width(self, width: int):
        m = _width_mask(width)
        return self._new(tuple(p & m for p in self.parts), width)

    def bit(self, i: int):
        return self._new(tuple((p >> i) & 1 for p in self.parts), 1)

    def gather(self, positions):
        """New word whose bit t is bit ``positions[t]`` of this word."""
        outs = []
        for p in self.parts:
            acc = self.ring.zeros(p.shape)
            for t, pos in enumerate(positions):
                acc = acc | (((p >> pos) & 1) << t)
            outs.append(acc)
        return self._new(tuple(outs), max(len(positions), 1))

    def reverse(self, width: int | None = None):
        w = self.width if width is None else width
        return self.gather(list(range(w - 1, -1, -1)))

    def parity(self, positions):
        """XOR of the selected bits, as a 1-bit share."""
        outs = []
        for p in self.parts:
            acc = self.ring.zeros(p.shape)
            for pos in positions:
                acc = acc ^ ((p >> pos) & 1)
            outs.append(acc)
        return self._new(tuple(outs), 1)


def concat(shares, axis: int = 0):
    first = shares[0]
    parts = tuple(np.concatenate([s.parts[j] for s in shares], axis=axis) for j in range(len(first.parts)))
    if isinstance(first, BinShare):
        return first._new(parts, max(s.width for s in shares))
    return first._new(parts)


def stack(shares, axis: int = 0):
    return concat([s.expand_dims(axis) for s in shares], axis=axis)


def share_linear(terms, constant=0) -> ArithShare:
    """sum_j lambda_j x_j + c for public lambda_j and c, without communication."""
    if not terms:
        raise ValueError("need at least one term")
    acc = None
    for lam, x in terms:
        t = x * lam
        acc = t if acc is None else acc + t
    return acc.add_public(constant)


@dataclass
class DaBit:
    arith: ArithShare
    binary: BinShare


# ----------------------------------------------------------------------
# Binary circuits written against any backend offering ``and_many``.

def prefix_generate(be, g: BinShare, p: BinShare, width: int) -> BinShare:
    """Kogge-Stone prefix: bit i of the result is the carry out of bits 0..i.

    ``g`` and ``p`` are the bitwise generate/propagate words.  Each level
    doubles the span and costs one round with two batched ANDs (only one
    on the last level).
    """
    d = 1
    while d < width:
        last = 2 * d >= width
        if last:
            (t,) = be.and_many([(p, g.shl(d))])
        else:
            t, p = be.and_many([(p, g.shl(d)), (p, p.shl(d))])
        g = g ^ t
        d *= 2
    return g


def add_binary(be, x: BinShare, y: BinShare, width: int) -> BinShare:
    """(x + y) mod 2^width for two shared words."""
    x, y = x.with_width(width), y.with_width(width)
    (g,) = be.and_many([(x, y)])
    p = x ^ y
    carries = prefix_generate(be, g, p, width)
    return p ^ carries.shl(1)


def carry_out(be, x: BinShare, y: BinShare, width: int) -> BinShare:
    """The carry leaving bit width-1 of x + y, as a 1-bit share."""
    x, y = x.with_width(width), y.with_width(width)
    (g,) = be.and_many([(x, y)])
    return prefix_generate(be, g, x ^ y, width).bit(width - 1)


def carry_out_public(be, x: BinShare, c: int, width: int) -> BinShare:
    """Carry out of x + c for a public c < 2^width; the first level is local."""
    x = x.with_width(width)
    c &= _width_mask(width)
    return prefix_generate(be, x & c, x ^ c, width).bit(width - 1)


def majority(be, a: BinShare, b: BinShare, c: BinShare) -> BinShare:
    """Bitwise majority with a single AND."""
    (t,) = be.and_many([(a ^ c, b ^ c)])
    return t ^ c


def add_three(be, a: BinShare, b: BinShare, c: BinShare, width: int) -> BinShare:
    """(a + b + c) mod 2^width by carry-save reduction and a prefix adder."""
    s = a ^ b ^ c
    cy = majority(be, a.with_width(width), b.with_width(width), c.with_width(width))
    return add_binary(be, s, cy.shl(1, width), width)


def or_(be, x: BinShare, y: BinShare) -> BinShare:
    (t,) = be.and_many([(~x, ~y)])
    return ~t


# ----------------------------------------------------------------------
# Wire encoding

def _itemsize(width: int) -> int:
    if width <= 8:
        return 1
    if width <= 16:
        return 2
    if width <= 32:
        return 4
    return 8


def _dtype(width: int):
    return {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}[_itemsize(width)]


def nbytes(n: int, width: int = 64) -> int:
    if width == 1:
        return (n + 7) // 8
    return n * _itemsize(width)


def serialize(arr: np.ndarray, width: int = 64) -> bytes:
    flat = np.ascontiguousarray(arr, dtype=np.uint64).ravel()
    if width == 1:
        return np.packbits(flat.astype(np.uint8), bitorder="little").tobytes()
    return flat.astype(_dtype(width)).tobytes()


def deserialize(buf: bytes, n: int, width: int = 64) -> np.ndarray:
    if width == 1:
        bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")[:n]
        return bits.astype(np.uint64)
    return np.frombuffer(buf, dtype=_dtype(width)).astype(np.uint64)


# ----------------------------------------------------------------------

@wraparound
class Engine:
    """Protocol engine of one party.

    Randomness: ``prg_next`` is shared with P_{i+1} and produces component
    i-1; ``prg_prev`` is shared with P_{i-1} and produces component i+1.
    Both holders of a key always consume it in the same order.
    """

    ring = RING64

    def __init__(self, session: Session):
        self.session = session
        self.id = session.my_id
        # position of component 0 among (prev, next)
        self.slot = {0: None, 1: 0, 2: 1}[self.id]

    # -- construction helpers ------------------------------------------
    def share(self, prev: np.ndarray, nxt: np.ndarray) -> ArithShare:
        return ArithShare((prev, nxt), RING64, self.slot)

    def bshare(self, prev: np.ndarray, nxt: np.ndarray, width: int) -> BinShare:
        return BinShare((prev, nxt), width, RING64, self.slot)

    def public(self, c, shape=None) -> ArithShare:
        c = to_ring(c)
        shape = c.shape if shape is None else shape
        z = np.zeros(shape, dtype=np.uint64)
        return self.share(z, z.copy()).add_public(c)

    def public_bin(self, c, width: int, shape=None) -> BinShare:
        c = to_ring(c) & np.uint64(_width_mask(width))
        shape = c.shape if shape is None else shape
        z = np.zeros(shape, dtype=np.uint64)
        return self.bshare(z, z.copy(), width).xor_public(c)

    def _comp_of(self, j: int) -> int | None:
        """Index within parts of component j, or None if not held."""
        if j % 3 == (self.id - 1) % 3:
            return 0
        if j % 3 == (self.id + 1) % 3:
            return 1
        return None

    def rand_comp(self, j: int, shape, width: int = 64) -> np.ndarray | None:
        """Component j of a fresh random sharing (None for the party lacking it)."""
        pos = self._comp_of(j)
        if pos is None:
            return None
        prg = self.session.prg_next if pos == 0 else self.session.prg_prev
        return prg.bits(shape, width)

    def rand_pair(self, shape, width: int = 64) -> tuple[np.ndarray, np.ndarray]:
        return self.session.prg_next.bits(shape, width), self.session.prg_prev.bits(shape, width)

    def _zero(self, shape) -> np.ndarray:
        return self.session.prg_next.ring(shape) - self.session.prg_prev.ring(shape)

    def _zero_bin(self, shape, width: int) -> np.ndarray:
        return self.session.prg_next.bits(shape, width) ^ self.session.prg_prev.bits(shape, width)

    def comm(self):
        return self.session.comm_snapshot()

    # -- sharing and opening -------------------------------------------
    def input(self, owner: int, value=None, shape=None) -> ArithShare:
        """Share ``value`` held by ``owner``; the owner sends one element."""
        if self.id == owner:
            if value is None:
                raise ValueError("the owner must supply a value")
            value = to_ring(value)
            shape = value.shape
        elif value is not None:
            raise ValueError("only the owner supplies a value")
        elif shape is None:
            raise ValueError("non-owners must know the shape")
        n = int(np.prod(shape, dtype=np.int64))
        if self.id == owner:
            x_prev = self.session.prg_next.ring(shape)
            x_next = value - x_prev
            self.session.exchange_both(to_prev=serialize(x_next))
            return self.share(x_prev, x_next)
        if self.id == (owner + 1) % 3:
            self.session.exchange_both()
            return self.share(np.zeros(shape, dtype=np.uint64), self.session.prg_prev.ring(shape))
        _, got = self.session.exchange_both(expect_from_next=nbytes(n))
        return self.share(deserialize(got, n).reshape(shape), np.zeros(shape, dtype=np.uint64))

    def open(self, x: ArithShare) -> np.ndarray:
        _, got = self.session.exchange_both(to_prev=serialize(x.parts[0]), expect_from_next=nbytes(x.size))
        return x.parts[0] + x.parts[1] + deserialize(got, x.size).reshape(x.shape)

    def open_bin(self, b: BinShare) -> np.ndarray:
        _, got = self.session.exchange_both(
            to_prev=serialize(b.parts[0], b.width), expect_from_next=nbytes(b.size, b.width)
        )
        return b.parts[0] ^ b.parts[1] ^ deserialize(got, b.size, b.width).reshape(b.shape)

    def _reveal_bin(self, b: BinShare, to: set[int]) -> np.ndarray | None:
        """Reveal a binary sharing to the parties in ``to`` only."""
        send = (self.id - 1) % 3 in to
        recv = self.id in to
        _, got = self.session.exchange_both(
            to_prev=serialize(b.parts[0], b.width) if send else b"",
            expect_from_next=nbytes(b.size, b.width) if recv else 0,
        )
        if not recv:
            return None
        return b.parts[0] ^ b.parts[1] ^ deserialize(got, b.size, b.width).reshape(b.shape)

    # -- multiplication --------------------------------------------------
    def _reshare(self, local: list[np.ndarray], zero_fn, width: int):
        flat = [w.ravel() for w in local]
        sizes = [w.size for w in flat]
        w = np.concatenate(flat) if flat else np.zeros(0, dtype=np.uint64)
        w = zero_fn(w)
        got = self.session.exchange(serialize(w, width), nbytes(w.size, width))
        recv = deserialize(got, w.size, width)
        out, pos = [], 0
        for loc, sz in zip(local, sizes):
            out.append((w[pos:pos + sz].reshape(loc.shape), recv[pos:pos + sz].reshape(loc.shape)))
            pos += sz
        return out

    def mul_many(self, pairs) -> list[ArithShare]:
        """Elementwise products of several pairs in one round."""
        local = []
        for x, y in pairs:
            (xp, xn), (yp, yn) = x.parts, y.parts
            local.append(xp * (yp + yn) + xn * yp)
        res = self._reshare(local, lambda w: w + self._zero(w.shape), 64)
        return [self.share(a, b) for a, b in res]

    def mul(self, x: ArithShare, y: ArithShare) -> ArithShare:
        return self.mul_many([(x, y)])[0]

    def matmul_many(self, pairs) -> list[ArithShare]:
        """Matrix products: local partial sums, one reshared element per output."""
        local = []
        for x, y in pairs:
            (xp, xn), (yp, yn) = x.parts, y.parts
            local.append(self.ring.matmul(xp, yp + yn) + self.ring.matmul(xn, yp))
        res = self._reshare(local, lambda w: w + self._zero(w.shape), 64)
        return [self.share(a, b) for a, b in res]

    def matmul(self, x: ArithShare, y: ArithShare) -> ArithShare:
        return self.matmul_many([(x, y)])[0]

    def dot(self, xs: ArithShare, ys: ArithShare) -> ArithShare:
        if xs.shape != ys.shape:
            raise ValueError(f"length mismatch {xs.shape} vs {ys.shape}")
        if xs.size == 0:
            return self.public(0, ())
        return self.matmul(xs.reshape(1, -1), ys.reshape(-1, 1)).reshape(())

    def and_many(self, pairs) -> list[BinShare]:
        local, widths = [], []
        for x, y in pairs:
            (xp, xn), (yp, yn) = x.parts, y.parts
            local.append((xp & (yp ^ yn)) ^ (xn & yp))
            widths.append(max(x.width, y.width))
        width = max(widths)
        res = self._reshare(local, lambda w: w ^ self._zero_bin(w.shape, width), width)
        out = []
        for (a, b), wd in zip(res, widths):
            m = np.uint64(_width_mask(wd))
            out.append(self.bshare(a & m, b & m, wd))
        return out

    def and_(self, x: BinShare, y: BinShare) -> BinShare:
        return self.and_many([(x, y)])[0]

    # -- domain conversion ---------------------------------------------
    def _component_operands(self, prev: np.ndarray, nxt: np.ndarray, width: int) -> list[BinShare]:
        """Binary sharings of the three components taken as separate operands."""
        m = np.uint64(_width_mask(width))
        z = np.zeros(prev.shape, dtype=np.uint64)
        ops = []
        for j in range(3):
            pos = self._comp_of(j)
            parts = [z, z]
            if pos == 0:
                parts[0] = prev & m
            elif pos == 1:
                parts[1] = nxt & m
            ops.append(self.bshare(parts[0], parts[1], width))
        return ops

    def a2b(self, x: ArithShare, bits: int) -> BinShare:
        """Binary sharing of the ``bits`` low bits of x.

        Each party decomposes its components locally; the three operands
        are summed with a carry-save step and a prefix adder.
        """
        if not 1 <= bits <= 64:
            raise ValueError("bits must be in 1..64")
        a0, a1, a2 = self._component_operands(x.parts[0], x.parts[1], bits)
        return add_three(self, a0, a1, a2, bits)

    def rand_bin(self, shape, width: int) -> BinShare:
        p, n = self.rand_pair(shape, width)
        return self.bshare(p, n, width)

    def b2a(self, b: BinShare) -> ArithShare:
        """Arithmetic sharing of the word held in binary form.

        Components 1 and 2 of the result are random; the binary circuit
        computes d = y - a_1 - a_2, which is revealed to P_1 and P_2 only
        and becomes component 0.
        """
        shape = b.shape
        a1 = self.rand_comp(1, shape)
        a2 = self.rand_comp(2, shape)
        # binary operands holding -a_1 (component 1) and -a_2 (component 2)
        z = np.zeros(shape, dtype=np.uint64)
        ops = []
        for j, a in ((1, a1), (2, a2)):
            pos = self._comp_of(j)
            parts = [z, z]
            if pos is not None:
                parts[pos] = np.negative(a)
            ops.append(self.bshare(parts[0], parts[1], 64))
        y = b.with_width(64) if b.width < 64 else b
        d = add_three(self, y, ops[0], ops[1], 64)
        dv = self._reveal_bin(d, {1, 2})
        if self.id == 0:
            return self.share(a2, a1)
        if self.id == 1:
            return self.share(dv, a2)
        return self.share(a1, dv)

    def dabits(self, shape) -> DaBit:
        """Random bits shared in both domains.

        The binary bit d = d_0 ^ d_1 ^ d_2 is free from the PRGs.  P_2 knows
        t = d_0 ^ d_1 and inputs it; then d = t + d_2 - 2 t d_2.
        """
        p, n = self.rand_pair(shape, 1)
        bits = self.bshare(p, n, 1)
        t = (p ^ n) if self.id == 2 else None
        ta = self.input(2, t, shape)
        z = np.zeros(shape, dtype=np.uint64)
        if self.id == 0:
            d2 = self.share(p.copy(), z)
        elif self.id == 1:
            d2 = self.share(z, n.copy())
        else:
            d2 = self.share(z, z.copy())
        prod = self.mul(ta, d2)
        return DaBit(ta + d2 - (prod << 1), bits)

    def bit2a(self, b: BinShare) -> ArithShare:
        if b.width != 1:
            b = b.with_width(1)
        db = self.dabits(b.shape)
        e = self.open_bin(b ^ db.binary)
        # b = e ^ d = e + d - 2ed
        return (db.arith * (1 - 2 * e.astype(np.int64))).add_public(e)

    # -- truncation ------------------------------------------------------
    def trunc_pr(self, x: ArithShare, total_bits: int, m: int) -> ArithShare:
        """Probabilistic truncation of a signed ``total_bits``-bit value by m bits.

        The value is offset to be non-negative, masked by r = r_0 + r_1 + r_2
        with 62-bit components and opened.  As the masked sum never wraps,
        floor(c / 2^m) equals floor(x'/2^m) + sum(h_j) + kappa + b where
        h_j = r_j >> m, kappa = floor(sum(l_j) / 2^m) for the low parts l_j,
        and b is a Bernoulli draw with mean frac(x' / 2^m).  kappa is
        computed with a binary circuit and subtracted.
        """
        check_trunc(total_bits, m, 64)
        rp, rn = self.rand_pair(x.shape, TRUNC_MASK_BITS)
        c = self.open(x.add_public(1 << (total_bits - 1)) + self.share(rp, rn))
        h = self.share(rp >> np.uint64(m), rn >> np.uint64(m))
        a0, a1, a2 = self._component_operands(rp, rn, m)
        s = a0 ^ a1 ^ a2
        cy = majority(self, a0, a1, a2)
        hi = carry_out(self, s, cy.shl(1), m) if m > 1 else self.public_bin(0, 1, x.shape)
        kappa = self.bit2a(concat([cy.bit(m - 1).expand_dims(0), hi.expand_dims(0)], axis=0))
        res = (-(h + kappa[0] + kappa[1])).add_public(c >> np.uint64(m))
        return res.add_public(-(1 << (total_bits - 1 - m)) & ((1 << 64) - 1))


def check_trunc(total_bits: int, m: int, ring_bits: int) -> None:
    if not 0 < m < total_bits:
        raise ConfigError(f"need 0 < m < total_bits, got m={m}, total_bits={total_bits}")
    slack = ring_bits - 2 - total_bits
    if slack < MIN_TRUNC_SLACK:
        raise ConfigError(
            f"probabilistic truncation of {total_bits}-bit values leaves {slack} bits of "
            f"statistical slack (< {MIN_TRUNC_SLACK})"
        )
