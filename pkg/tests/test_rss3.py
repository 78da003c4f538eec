import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepmpc.quantring import MASK64, ConfigError
from deepmpc.rss3 import (
    MIN_TRUNC_SLACK,
    add_binary,
    carry_out,
    check_trunc,
    deserialize,
    nbytes,
    serialize,
    share_linear,
)
from deepmpc.transport import CommStats

from conftest import mpc, mpc0

u64 = st.integers(0, MASK64)


def _inp(be, owner, v, shape=None):
    raw = np.asarray(v, dtype=np.uint64) if be.holds_input(owner) else None
    return be.input(owner, raw, None if raw is not None else shape)


def _input_costs(be, v):
    c0 = be.comm()
    x = _inp(be, 0, v, ())
    c = be.comm() - c0
    sent = dict(be.session.sent_to)
    return int(be.open(x)), c.bits_sent, sent


def test_input_roundtrip_and_cost():
    for v in (42, 0):
        res = mpc(_input_costs, v)
        assert [r[0] for r in res] == [v] * 3
        assert [r[1] for r in res] == [64, 0, 0]
        # the owner's element goes to its previous neighbour only
        assert res[0][2][2] == 8 and res[0][2][1] == 0


def test_input_argument_errors():
    def owner_without_value(be):
        return be.input(be.id, None, ())

    with pytest.raises(ValueError):
        mpc(owner_without_value)


def _open_cost(be):
    x = _inp(be, 1, 7, ())
    c0 = be.comm()
    v = be.open(x)
    return int(v), (be.comm() - c0).bits_sent, int(be.open(share_linear([(3, x), (-1, x)], 5)))


def test_open_agreement_and_cost():
    res = mpc(_open_cost)
    assert [r[0] for r in res] == [7, 7, 7]
    assert sum(r[1] for r in res) == 192
    assert [r[2] for r in res] == [19, 19, 19]


def _linear(be, a, b, lam, mu, c):
    x, y = _inp(be, 0, a, ()), _inp(be, 2, b, ())
    c0 = be.comm()
    z = share_linear([(lam, x), (mu, y)], c)
    z2 = x + y
    cost = (be.comm() - c0).bits_sent
    return int(be.open(z)), int(be.open(z2)), cost


@given(u64, u64, u64, u64, u64)
@settings(max_examples=15, deadline=None)
def test_linearity(a, b, lam, mu, c):
    z, z2, cost = mpc0(_linear, a, b, lam, mu, c)
    assert z == (lam * a + mu * b + c) & MASK64
    assert z2 == (a + b) & MASK64
    assert cost == 0


def _mul(be, xs, ys):
    x, y = _inp(be, 0, xs, (len(xs),)), _inp(be, 1, ys, (len(ys),))
    c0 = be.comm()
    z = be.mul(x, y)
    c = be.comm() - c0
    return be.open(z), c


def test_mul_examples_and_cost():
    res = mpc(_mul, [3, 0, 2**63], [5, 11, 2])
    assert res[0][0].tolist() == [15, 0, 0]
    assert sum(r[1].bits_sent for r in res) == 3 * 192
    assert all(r[1].rounds == 1 for r in res)


@given(st.lists(st.tuples(u64, u64), min_size=1, max_size=50))
@settings(max_examples=20, deadline=None)
def test_mul_exact(pairs):
    xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    out = mpc0(_mul, xs, ys)[0]
    assert out.tolist() == [(a * b) & MASK64 for a, b in pairs]


def _batch(be, m):
    x = _inp(be, 0, np.arange(m), (m,))
    c0 = be.comm()
    outs = be.mul_many([(x, x), (x, x + x), (x[:2], x[:2])])
    rounds = (be.comm() - c0).rounds
    return [be.open(o) for o in outs], rounds


def test_batched_multiplications_cost_one_round():
    outs, rounds = mpc0(_batch, 10)
    assert rounds == 1
    assert outs[1].tolist() == [2 * i * i for i in range(10)]


def _dot(be, xs, ys):
    n = len(xs)
    x, y = _inp(be, 0, xs, (n,)), _inp(be, 1, ys, (n,))
    c0 = be.comm()
    z = be.dot(x, y)
    c = be.comm() - c0
    return int(be.open(z)), c


def test_dot_examples():
    assert mpc0(_dot, [1, 2, 3], [4, 5, 6])[0] == 32
    res = mpc(_dot, list(range(1000)), list(range(1000)))
    assert sum(r[1].bits_sent for r in res) == 192
    assert res[0][0] == sum(i * i for i in range(1000))
    assert mpc0(_dot, [], [])[0] == 0

    def mismatch(be):
        return be.dot(be.zeros((2,)), be.zeros((3,)))

    with pytest.raises(ValueError):
        mpc(mismatch)


def _matmul(be, A, B):
    a, b = _inp(be, 0, A, A.shape), _inp(be, 1, B, B.shape)
    c0 = be.comm()
    z = be.matmul(a, b)
    bits = (be.comm() - c0).bits_sent
    return be.open(z), bits


def test_matmul_one_element_per_output():
    rng = np.random.default_rng(0)
    A = rng.integers(0, 2**64, (3, 40), dtype=np.uint64)
    B = rng.integers(0, 2**64, (40, 2), dtype=np.uint64)
    res = mpc(_matmul, A, B)
    want = [[sum(int(A[i, l]) * int(B[l, j]) for l in range(40)) & MASK64 for j in range(2)] for i in range(3)]
    assert res[0][0].tolist() == want
    assert sum(r[1] for r in res) == 6 * 192


def _a2b(be, v, bits):
    x = _inp(be, 0, v, np.shape(v))
    b = be.a2b(x, bits)
    return be.open_bin(b), be.open(be.b2a(b)), be.open(be.b2a(be.a2b(x, 64)))


def test_a2b_examples():
    bits, back, full = mpc0(_a2b, 6, 3)
    assert [(int(bits) >> i) & 1 for i in range(3)] == [0, 1, 1]
    assert int(back) == 6 and int(full) == 6
    bits, _, _ = mpc0(_a2b, 2**64 - 1, 64)
    assert int(bits) >> 63 == 1


@given(st.lists(u64, min_size=1, max_size=20), st.integers(1, 64))
@settings(max_examples=20, deadline=None)
def test_b2a_a2b_identity(vals, bits):
    b, back, full = mpc0(_a2b, np.array(vals, dtype=np.uint64), bits)
    mask = (1 << bits) - 1
    assert b.tolist() == [v & mask for v in vals]
    assert back.tolist() == [v & mask for v in vals]
    assert full.tolist() == vals


def test_b2a_examples():
    _, back, _ = mpc0(_a2b, 5, 3)
    assert int(back) == 5
    _, back, _ = mpc0(_a2b, 0, 8)
    assert int(back) == 0


def _bit2a(be, vals):
    x = _inp(be, 0, vals, (len(vals),))
    b = be.a2b(x, 1)
    return be.open(be.bit2a(b))


def test_bit2a():
    assert mpc0(_bit2a, [1, 0]).tolist() == [1, 0]
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, 8)
    # popcount oracle: open and count in the clear
    assert int(mpc0(_bit2a, bits.tolist()).sum()) == int(bits.sum())


def _dabits(be, n):
    d = be.dabits((n,))
    return be.open(d.arith), be.open_bin(d.binary)


def test_dabits():
    a, b = mpc0(_dabits, 10_000)
    assert set(np.unique(a)) <= {0, 1}
    assert np.array_equal(a, b)
    assert abs(a.mean() - 0.5) <= 4 * 0.5 / math.sqrt(10_000)


def _adders(be, xs, ys, w):
    n = len(xs)
    x = be.a2b(_inp(be, 0, xs, (n,)), w)
    y = be.a2b(_inp(be, 1, ys, (n,)), w)
    s = add_binary(be, x, y, w)
    c = carry_out(be, x, y, w)
    a = be.and_(x, y)
    return be.open_bin(s), be.open_bin(c), be.open_bin(a), be.open_bin(x ^ y), be.open_bin(~x)


@given(st.integers(1, 64), st.lists(st.tuples(u64, u64), min_size=1, max_size=10))
@settings(max_examples=15, deadline=None)
def test_binary_circuits(w, pairs):
    mask = (1 << w) - 1
    xs = [p[0] & mask for p in pairs]
    ys = [p[1] & mask for p in pairs]
    s, c, a, x, inv = mpc0(_adders, xs, ys, w)
    assert s.tolist() == [(p + q) & mask for p, q in zip(xs, ys)]
    assert c.tolist() == [(p + q) >> w for p, q in zip(xs, ys)]
    assert a.tolist() == [p & q for p, q in zip(xs, ys)]
    assert x.tolist() == [p ^ q for p, q in zip(xs, ys)]
    assert inv.tolist() == [p ^ mask for p in xs]


@given(st.sampled_from([1, 5, 8, 13, 16, 31, 32, 64]), st.lists(u64, max_size=30))
def test_serialization_roundtrip(width, vals):
    arr = np.array(vals, dtype=np.uint64) & np.uint64(MASK64 if width == 64 else (1 << width) - 1)
    buf = serialize(arr, width)
    assert len(buf) == nbytes(arr.size, width)
    assert np.array_equal(deserialize(buf, arr.size, width), arr)


def test_trunc_slack_check():
    check_trunc(62 - MIN_TRUNC_SLACK, 16, 64)
    with pytest.raises(ConfigError):
        check_trunc(62 - MIN_TRUNC_SLACK + 1, 16, 64)
    with pytest.raises(ConfigError):
        check_trunc(20, 20, 64)


def _view(be, secret):
    """Everything party 1 sees while party 0 shares ``secret``: its parts."""
    x = _inp(be, 0, secret, ())
    return [np.asarray(p).tolist() for p in x.parts]


def test_input_privacy_smoke():
    a = mpc(_view, 5, seed=3)
    b = mpc(_view, 9, seed=3)
    # party 1 holds (0, PRG value): identical for both secrets
    assert a[1] == b[1]
    # party 2's only difference is the element it received, which is its own share
    assert a[2][1] == b[2][1] and a[2][0] != b[2][0]
