"""Ring arithmetic modulo 2^64 and fixed-point quantization.

Every secret value in the framework is an element of Z_{2^64}, stored as
``numpy.uint64`` so that numpy's wrapping integer arithmetic is the ring
arithmetic.  A 128-bit ring backed by Python ints is available to the
emulator for high-precision runs.

A real number x is represented by Q(x) = round(x * 2^f), and products of
two such values are brought back to precision f either by nearest
rounding or by probabilistic rounding:

    R(mu) = floor(mu) + b,   b ~ Bernoulli(frac(mu)).

The cleartext functions here define the numeric semantics that the secure
protocols and the emulator reproduce.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass

import numpy as np

RING_BITS = 64
MASK64 = (1 << 64) - 1
U64 = np.uint64


def wraparound(cls):
    """Silence numpy overflow warnings in every method: wrapping is the point."""
    for name, fn in list(vars(cls).items()):
        if inspect.isfunction(fn):
            setattr(cls, name, np.errstate(over="ignore")(fn))
    return cls


class RangeError(ValueError):
    """A value does not fit the configured fixed-point range."""


class ConfigError(ValueError):
    """Inconsistent quantization or protocol parameters."""


def to_ring(x) -> np.ndarray:
    """Map Python ints or integer arrays (any sign) into uint64 residues."""
    if isinstance(x, (int, np.integer)):
        return np.asarray(int(x) & MASK64, dtype=np.uint64)
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype == object:
        return np.array([int(v) & MASK64 for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    if arr.dtype.kind in "iub":
        return arr.astype(np.int64).view(np.uint64)
    raise TypeError(f"cannot map dtype {arr.dtype} into the ring")


def to_signed(a) -> np.ndarray:
    """Two's-complement reinterpretation of ring elements as int64."""
    return np.asarray(a, dtype=np.uint64).view(np.int64)


@wraparound
class Ring:
    """Residues modulo 2^bits stored in numpy arrays.

    The 64-bit ring uses ``uint64`` and relies on native wraparound.  The
    128-bit ring (emulator only, for high-precision checks) stores Python
    ints in object arrays and masks after every operation that can leave
    [0, 2^128).
    """

    def __init__(self, bits: int):
        if bits not in (64, 128):
            raise ConfigError(f"unsupported ring width {bits}")
        self.bits = bits
        self.mask = (1 << bits) - 1
        self.native = bits == 64
        self.dtype = np.uint64 if self.native else object

    def __repr__(self) -> str:
        return f"Ring({self.bits})"

    def wrap(self, a):
        return a if self.native else a & self.mask

    def cast(self, x) -> np.ndarray:
        """Integers of any sign (scalars or arrays) as ring elements."""
        if self.native:
            return to_ring(x)
        arr = np.asarray(x)
        if arr.dtype == np.uint64:
            arr = arr.astype(object)
        else:
            arr = arr.astype(object) if arr.dtype != object else arr
        return np.asarray(arr & self.mask, dtype=object)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.uint64) if self.native else np.full(shape, 0, dtype=object)

    def signed(self, a) -> np.ndarray:
        if self.native:
            return to_signed(a)
        a = np.asarray(a, dtype=object)
        half = 1 << (self.bits - 1)
        return np.where(a >= half, a - (1 << self.bits), a)

    def to_float(self, a) -> np.ndarray:
        return np.asarray(self.signed(a)).astype(np.float64)

    def matmul(self, a, b) -> np.ndarray:
        if self.native:
            return ring_matmul(a, b)
        return np.matmul(a, b) & self.mask

    def random(self, rng: np.random.Generator, shape, bits: int) -> np.ndarray:
        """Uniform integers in [0, 2^bits)."""
        if bits <= 0:
            return self.zeros(shape)
        if self.native:
            if bits == 64:
                return rng.integers(0, 1 << 64, size=shape, dtype=np.uint64)
            return rng.integers(0, 1 << bits, size=shape, dtype=np.uint64)
        out = np.full(shape, 0, dtype=object)
        done = 0
        while done < bits:
            step = min(32, bits - done)
            part = rng.integers(0, 1 << step, size=shape, dtype=np.int64).astype(object)
            out = out | (part << done)
            done += step
        return out


RING64 = Ring(64)
RING128 = Ring(128)


def ring_for(bits: int) -> Ring:
    return RING64 if bits == 64 else RING128


def ring_arith(op: str, a, b):
    """Single ring operation on Python ints, returned as a Python int."""
    a &= MASK64
    b &= MASK64
    if op == "add":
        return (a + b) & MASK64
    if op == "sub":
        return (a - b) & MASK64
    if op == "mul":
        return (a * b) & MASK64
    if op == "neg":
        return (-a) & MASK64
    raise ValueError(f"unknown ring op {op!r}")


@dataclass(frozen=True)
class FixedConfig:
    f: int = 16
    k: int = 31
    ring_bits: int = RING_BITS

    def __post_init__(self):
        if self.ring_bits not in (64, 128):
            raise ConfigError("ring width must be 64 (or 128 for emulation)")
        if not 0 < self.f < self.k:
            raise ConfigError(f"need 0 < f < k, got f={self.f}, k={self.k}")
        if self.k >= self.ring_bits // 2:
            raise ConfigError(f"k must be below half the ring width, got k={self.k}")
        if self.k < 2 * self.f - 1:
            raise ConfigError(f"division needs k >= 2f-1, got f={self.f}, k={self.k}")

    @property
    def ring(self) -> Ring:
        return ring_for(self.ring_bits)

    @property
    def eps(self) -> float:
        return 2.0 ** -self.f

    @property
    def one(self) -> int:
        return 1 << self.f

    @property
    def ell(self) -> int:
        """Number of integer-part bits consumed by exp2."""
        return int(np.ceil(np.log2(self.k - self.f)))


@dataclass
class ClearFixed:
    raw: np.ndarray
    cfg: FixedConfig

    def decode(self) -> np.ndarray:
        return fx_decode(self)


@dataclass
class RoundingOutcome:
    mu_floor: np.ndarray
    frac: np.ndarray
    bit: np.ndarray

    @property
    def result(self) -> np.ndarray:
        return (self.mu_floor.astype(np.int64) + self.bit).view(np.uint64)


def encode(x, cfg: FixedConfig, check: bool = True) -> np.ndarray:
    """Raw ring representation round(x * 2^f), ties rounded up."""
    x = np.asarray(x, dtype=np.float64)
    if check and x.size and np.max(np.abs(x)) >= 2.0 ** (cfg.k - cfg.f - 1):
        raise RangeError(f"|x| must be below 2^{cfg.k - cfg.f - 1}")
    return cfg.ring.cast(np.floor(x * float(1 << cfg.f) + 0.5).astype(np.int64))


def decode(raw, cfg: FixedConfig) -> np.ndarray:
    return cfg.ring.to_float(raw) / float(1 << cfg.f)


def fx_encode(x, cfg: FixedConfig) -> ClearFixed:
    return ClearFixed(encode(x, cfg), cfg)


def fx_decode(v: ClearFixed) -> np.ndarray:
    return decode(v.raw, v.cfg)


def round_outcome(prod, shift: int, rng: np.random.Generator) -> RoundingOutcome:
    """Split prod * 2^-shift into floor and fraction and draw the rounding bit.

    The Bernoulli draw compares ``shift`` fresh random bits against the
    ``shift``-bit fraction, so it is exact.
    """
    p = to_signed(to_ring(prod))
    mask = (1 << shift) - 1
    floor = p >> shift
    frac = p & mask
    u = rng.integers(0, 1 << shift, size=p.shape, dtype=np.int64)
    bit = (u < frac).astype(np.int64)
    return RoundingOutcome(floor.view(np.uint64), frac / float(1 << shift), bit)


def round_prob_clear(prod, cfg: FixedConfig, rng: np.random.Generator, shift: int | None = None) -> np.ndarray:
    return round_outcome(prod, cfg.f if shift is None else shift, rng).result


def round_nearest_clear(prod, cfg: FixedConfig, shift: int | None = None) -> np.ndarray:
    m = cfg.f if shift is None else shift
    p = to_signed(to_ring(prod))
    return ((p + (1 << (m - 1))) >> m).view(np.uint64)


_LIMB = 16
_LIMB_MASK = np.uint64((1 << _LIMB) - 1)


def _limbs(a: np.ndarray) -> list[np.ndarray]:
    return [((a >> np.uint64(_LIMB * i)) & _LIMB_MASK).astype(np.float64) for i in range(4)]


def ring_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact matrix product modulo 2^64, supporting numpy batch broadcasting.

    Operands are split into 16-bit limbs and multiplied with float64 BLAS.
    Each limb product is below n * 2^32 and at most four are summed per
    output limb, so results are exact for inner dimension n < 2^19.
    Operands whose signed values fit in 32 bits take a four-product path.
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    n = a.shape[-1]
    if n >= 1 << 19:
        raise ValueError("inner dimension too large for exact limb products")
    if _fits_i32(a) and _fits_i32(b):
        return _matmul_small(a, b)
    al, bl = _limbs(a), _limbs(b)
    out = None
    for s in range(4):
        acc = None
        for i in range(s + 1):
            t = al[i] @ bl[s - i]
            acc = t if acc is None else acc + t
        part = acc.astype(np.uint64) << np.uint64(_LIMB * s)
        out = part if out is None else out + part
    return out


def _fits_i32(a: np.ndarray) -> bool:
    if a.size == 0:
        return True
    return bool(np.all((a + np.uint64(1 << 31)) < np.uint64(1 << 32)))


def _matmul_small(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # signed split x = hi * 2^16 + lo with lo in [0, 2^16), hi in [-2^15, 2^15)
    sa, sb = to_signed(a), to_signed(b)
    alo, ahi = (sa & 0xFFFF).astype(np.float64), (sa >> 16).astype(np.float64)
    blo, bhi = (sb & 0xFFFF).astype(np.float64), (sb >> 16).astype(np.float64)
    ll = (alo @ blo).astype(np.int64)
    mid = (alo @ bhi + ahi @ blo).astype(np.int64)
    hh = (ahi @ bhi).astype(np.int64)
    with np.errstate(over="ignore"):
        out = ll.view(np.uint64) + (mid.view(np.uint64) << np.uint64(16)) + (hh.view(np.uint64) << np.uint64(32))
    return out


def clear_matmul_quantized(
    A: np.ndarray,
    B: np.ndarray,
    cfg: FixedConfig,
    mode: str = "prob",
    rng: np.random.Generator | None = None,
    per_product: bool = False,
) -> np.ndarray:
    """Quantized product of raw fixed-point matrices at precision f.

    By default the dot products are accumulated at precision 2f and rounded
    once per output entry.  With ``per_product`` every product A_il * B_lj is
    rounded individually before summation.
    """
    A = to_ring(np.asarray(A))
    B = to_ring(np.asarray(B))
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch {A.shape} x {B.shape}")
    if mode not in ("prob", "nearest"):
        raise ValueError(f"unknown rounding mode {mode!r}")
    if mode == "prob" and rng is None:
        raise ValueError("probabilistic rounding needs an rng")
    if per_product:
        prods = A[:, :, None] * B[None, :, :]
        r = round_prob_clear(prods, cfg, rng) if mode == "prob" else round_nearest_clear(prods, cfg)
        return r.sum(axis=1, dtype=np.uint64)
    prod = ring_matmul(A, B)
    return round_prob_clear(prod, cfg, rng) if mode == "prob" else round_nearest_clear(prod, cfg)
