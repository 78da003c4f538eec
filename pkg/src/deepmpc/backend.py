"""Two interchangeable executors behind one operation surface.

``MPCBackend`` runs the three-party protocols of :mod:`deepmpc.rss3` for
one party.  ``EmulatorBackend`` performs the same quantized computation on
plain ring values: shares have a single part, every "protocol" is the
function it computes, and randomness comes from one seeded numpy stream.

All higher-level algorithms (``secmath``, ``neuralnet``) are written once
against the methods below, so with nearest rounding both backends give
bit-identical results.
"""
from __future__ import annotations

from collections import Counter

import numpy as np

from .quantring import ConfigError, FixedConfig, decode, encode, wraparound
from .rss3 import ArithShare, BinShare, DaBit, Engine, check_trunc
from .transport import CommStats, Session

ROUNDING_MODES = ("prob", "nearest")


class Backend:
    mode = "abstract"

    def __init__(self, cfg: FixedConfig, rounding: str = "prob", seed: int = 0):
        if rounding not in ROUNDING_MODES:
            raise ConfigError(f"rounding must be one of {ROUNDING_MODES}, got {rounding!r}")
        self.cfg = cfg
        self.ring = cfg.ring
        self.rounding = rounding
        self.seed = seed
        self.op_counts: Counter = Counter()

    # primitives supplied by subclasses --------------------------------
    def public(self, c, shape=None) -> ArithShare:
        raise NotImplementedError

    def public_bin(self, c, width: int, shape=None) -> BinShare:
        raise NotImplementedError

    def holds_input(self, owner: int) -> bool:
        raise NotImplementedError

    def input(self, owner: int, value=None, shape=None) -> ArithShare:
        raise NotImplementedError

    def open(self, x: ArithShare) -> np.ndarray:
        raise NotImplementedError

    def open_bin(self, b: BinShare) -> np.ndarray:
        raise NotImplementedError

    def mul_many(self, pairs) -> list[ArithShare]:
        raise NotImplementedError

    def matmul_many(self, pairs) -> list[ArithShare]:
        raise NotImplementedError

    def and_many(self, pairs) -> list[BinShare]:
        raise NotImplementedError

    def a2b(self, x: ArithShare, bits: int) -> BinShare:
        raise NotImplementedError

    def b2a(self, b: BinShare) -> ArithShare:
        raise NotImplementedError

    def bit2a(self, b: BinShare) -> ArithShare:
        raise NotImplementedError

    def dabits(self, shape) -> DaBit:
        raise NotImplementedError

    def rand_bin(self, shape, width: int) -> BinShare:
        raise NotImplementedError

    def trunc_pr(self, x: ArithShare, total_bits: int, m: int) -> ArithShare:
        raise NotImplementedError

    def comm(self) -> CommStats:
        raise NotImplementedError

    # conveniences -------------------------------------------------------
    def mul(self, x: ArithShare, y: ArithShare) -> ArithShare:
        return self.mul_many([(x, y)])[0]

    def matmul(self, x: ArithShare, y: ArithShare) -> ArithShare:
        return self.matmul_many([(x, y)])[0]

    def and_(self, x: BinShare, y: BinShare) -> BinShare:
        return self.and_many([(x, y)])[0]

    def dot(self, xs: ArithShare, ys: ArithShare) -> ArithShare:
        if xs.shape != ys.shape:
            raise ValueError(f"length mismatch {xs.shape} vs {ys.shape}")
        if xs.size == 0:
            return self.public(0, ())
        return self.matmul(xs.reshape(1, -1), ys.reshape(-1, 1)).reshape(())

    def zeros(self, shape) -> ArithShare:
        return self.public(0, shape)

    def encode(self, x) -> np.ndarray:
        return encode(x, self.cfg)

    def public_fixed(self, x) -> ArithShare:
        return self.public(encode(x, self.cfg))

    def input_fixed(self, owner: int, x=None, shape=None) -> ArithShare:
        """Share a real-valued array held by ``owner`` at precision f."""
        raw = encode(x, self.cfg) if self.holds_input(owner) else None
        return self.input(owner, raw, None if raw is not None else shape)

    def reveal(self, x: ArithShare) -> np.ndarray:
        """Open and decode a fixed-point sharing."""
        return decode(self.open(x), self.cfg)


@wraparound
class EmulatorBackend(Backend):
    """Cleartext execution of the quantized algorithms."""

    mode = "emulate"

    def __init__(self, cfg: FixedConfig, rounding: str = "prob", seed: int = 0):
        super().__init__(cfg, rounding, seed)
        self.rng = np.random.default_rng(seed)
        self.id = 0

    def _a(self, v) -> ArithShare:
        return ArithShare((v,), self.ring, 0)

    def _b(self, v, width: int) -> BinShare:
        return BinShare((v,), width, self.ring, 0)

    def public(self, c, shape=None) -> ArithShare:
        v = self.ring.cast(c)
        if shape is not None and v.shape != tuple(shape):
            v = np.broadcast_to(v, shape).copy()
        return self._a(v)

    def public_bin(self, c, width: int, shape=None) -> BinShare:
        v = self.ring.cast(c) & ((1 << width) - 1)
        if shape is not None and v.shape != tuple(shape):
            v = np.broadcast_to(v, shape).copy()
        return self._b(v, width)

    def holds_input(self, owner: int) -> bool:
        return True

    def input(self, owner: int, value=None, shape=None) -> ArithShare:
        if value is None:
            raise ValueError("the emulator needs the input value")
        return self._a(self.ring.cast(value).copy())

    def open(self, x: ArithShare) -> np.ndarray:
        return np.array(x.parts[0], copy=True)

    def open_bin(self, b: BinShare) -> np.ndarray:
        return np.array(b.parts[0], copy=True)

    def mul_many(self, pairs) -> list[ArithShare]:
        return [self._a(self.ring.wrap(x.parts[0] * y.parts[0])) for x, y in pairs]

    def matmul_many(self, pairs) -> list[ArithShare]:
        return [self._a(self.ring.matmul(x.parts[0], y.parts[0])) for x, y in pairs]

    def and_many(self, pairs) -> list[BinShare]:
        return [self._b(x.parts[0] & y.parts[0], max(x.width, y.width)) for x, y in pairs]

    def a2b(self, x: ArithShare, bits: int) -> BinShare:
        if not 1 <= bits <= self.ring.bits:
            raise ValueError(f"bits must be in 1..{self.ring.bits}")
        return self._b(x.parts[0] & ((1 << bits) - 1), bits)

    def b2a(self, b: BinShare) -> ArithShare:
        return self._a(np.array(b.parts[0], copy=True))

    def bit2a(self, b: BinShare) -> ArithShare:
        return self._a(b.parts[0] & 1)

    def dabits(self, shape) -> DaBit:
        r = self.ring.random(self.rng, shape, 1)
        return DaBit(self._a(r), self._b(r.copy(), 1))

    def rand_bin(self, shape, width: int) -> BinShare:
        return self._b(self.ring.random(self.rng, shape, width), width)

    def trunc_pr(self, x: ArithShare, total_bits: int, m: int) -> ArithShare:
        """floor(x / 2^m) plus a Bernoulli draw with mean frac(x / 2^m)."""
        check_trunc(total_bits, m, self.ring.bits)
        s = self.ring.signed(x.parts[0])
        low = s & ((1 << m) - 1)
        u = self.ring.random(self.rng, s.shape, m)
        up = (u < low)
        if self.ring.native:
            return self._a(self.ring.cast((s >> m) + up.astype(np.int64)))
        return self._a(self.ring.cast((s >> m) + up.astype(object)))

    def comm(self) -> CommStats:
        return CommStats(0, 0)


class MPCBackend(Backend):
    """One party of the three-party protocol."""

    mode = "mpc3"

    def __init__(self, session: Session, cfg: FixedConfig, rounding: str = "prob", seed: int = 0):
        if cfg.ring_bits != 64:
            raise ConfigError("the secure engine runs over the 64-bit ring only")
        super().__init__(cfg, rounding, seed)
        self.engine = Engine(session)
        self.session = session
        self.id = session.my_id

    def public(self, c, shape=None) -> ArithShare:
        return self.engine.public(c, shape)

    def public_bin(self, c, width: int, shape=None) -> BinShare:
        return self.engine.public_bin(c, width, shape)

    def holds_input(self, owner: int) -> bool:
        return self.id == owner

    def input(self, owner: int, value=None, shape=None) -> ArithShare:
        return self.engine.input(owner, value, shape)

    def open(self, x):
        return self.engine.open(x)

    def open_bin(self, b):
        return self.engine.open_bin(b)

    def mul_many(self, pairs):
        return self.engine.mul_many(pairs)

    def matmul_many(self, pairs):
        return self.engine.matmul_many(pairs)

    def and_many(self, pairs):
        return self.engine.and_many(pairs)

    def a2b(self, x, bits):
        return self.engine.a2b(x, bits)

    def b2a(self, b):
        return self.engine.b2a(b)

    def bit2a(self, b):
        return self.engine.bit2a(b)

    def dabits(self, shape):
        return self.engine.dabits(shape)

    def rand_bin(self, shape, width):
        return self.engine.rand_bin(shape, width)

    def trunc_pr(self, x, total_bits, m):
        return self.engine.trunc_pr(x, total_bits, m)

    def comm(self) -> CommStats:
        return self.session.comm_snapshot()


def make_backend(
    mode: str,
    cfg: FixedConfig | None = None,
    rounding: str = "prob",
    seed: int = 0,
    session: Session | None = None,
) -> Backend:
    cfg = cfg or FixedConfig()
    if mode == "emulate":
        return EmulatorBackend(cfg, rounding, seed)
    if mode in ("mpc3", "3pc"):
        if session is None:
            raise ConfigError("mpc3 mode needs an established session")
        return MPCBackend(session, cfg, rounding, seed)
    raise ConfigError(f"unknown backend mode {mode!r}")
