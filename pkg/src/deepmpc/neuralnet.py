"""Layers, loss, optimizers and model definitions over secret-shared tensors.

Activations, weights and gradients are ``ArithShare`` arrays at precision
f, batch first.  Every layer's ``forward`` keeps what ``backward`` needs.
Gradients are summed over the batch, never averaged; the optimizer
applies the batch-size division.
"""
from __future__ import annotations

import math

import numpy as np

from . import secmath as sm
from .quantring import ConfigError
from .rss3 import ArithShare, concat, stack

ShareTensor = ArithShare


def _log2_exact(n: int) -> int | None:
    return n.bit_length() - 1 if n > 0 and n & (n - 1) == 0 else None


def _mean(be, total: ArithShare, n: int) -> ArithShare:
    """total / n for a sum of n values at precision f.

    The power-of-two part of n is one truncation; any remainder becomes a
    public factor in (1/2, 1].
    """
    lg = max(n.bit_length() - 1, 0)
    out = sm.trunc(be, total, be.cfg.k + lg, lg) if lg else total
    if n != 1 << lg:
        out = sm.fxmul_public(be, out, (1 << lg) / n)
    return out


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, ArithShare] = {}
        self.grads: dict[str, ArithShare] = {}
        self.in_shape: tuple | None = None
        self.out_shape: tuple | None = None

    def build(self, in_shape: tuple) -> tuple:
        self.in_shape = tuple(in_shape)
        self.out_shape = self.output_shape(self.in_shape)
        return self.out_shape

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def init_params(self, be, mode: str = "secure", rng: np.random.Generator | None = None) -> None:
        pass

    def forward(self, be, x: ArithShare, train: bool = True) -> ArithShare:
        raise NotImplementedError

    def backward(self, be, dy: ArithShare, need_dx: bool = True) -> ArithShare | None:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(out={self.out_shape})"


def glorot_bound(d_in: int, d_out: int) -> float:
    return math.sqrt(6.0 / (d_in + d_out))


def glorot_init(be, d_in: int, d_out: int, shape) -> ArithShare:
    """Uniform weights on [-B, B], B = sqrt(6 / (d_in + d_out)).

    A uniform fraction on [0, 2) is shifted to [-1, 1) and scaled by the
    bound rounded down, so no sample leaves [-B, B].
    """
    if d_in + d_out <= 0:
        raise ValueError("d_in + d_out must be positive")
    f = be.cfg.f
    bound_raw = int(math.floor(glorot_bound(d_in, d_out) * (1 << f)))
    u = sm.rand_fraction(be, shape, 1).add_public(be.ring.mask + 1 - (1 << f))
    return sm.trunc(be, u * bound_raw, be.cfg.k + f, f)


def _clear_glorot(be, rng, d_in, d_out, shape) -> ArithShare:
    b = glorot_bound(d_in, d_out)
    w = rng.uniform(-b, b, size=shape) if be.holds_input(0) else None
    return be.input_fixed(0, w, shape)


class Dense(Layer):
    kind = "dense"

    def __init__(self, units: int):
        super().__init__()
        self.units = units

    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ValueError(f"dense expects flat inputs, got {in_shape}")
        return (self.units,)

    def init_params(self, be, mode="secure", rng=None):
        d_in = self.in_shape[0]
        shape = (d_in, self.units)
        if mode == "secure":
            self.params["W"] = glorot_init(be, d_in, self.units, shape)
        else:
            self.params["W"] = _clear_glorot(be, rng, d_in, self.units, shape)
        self.params["b"] = be.zeros((self.units,))

    def forward(self, be, x, train=True):
        if x.shape[1:] != self.in_shape:
            raise ValueError(f"shape mismatch: expected (B, {self.in_shape}), got {x.shape}")
        self._x = x
        y = sm.fxmatmul(be, x, self.params["W"])
        return y + self.params["b"].broadcast_to(y.shape)

    def backward(self, be, dy, need_dx=True):
        x, W = self._x, self.params["W"]
        pairs = [(x.T, dy)] + ([(dy, W.T)] if need_dx else [])
        prods = be.matmul_many(pairs)
        outs = sm.trunc_many(be, prods, be.cfg.k + be.cfg.f, be.cfg.f)
        self.grads["W"] = outs[0]
        self.grads["b"] = dy.sum(axis=0)
        return outs[1] if need_dx else None


def _conv_out(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


class Conv2D(Layer):
    """Cross-correlation over (B, C, H, W) inputs via patch matrices."""

    kind = "conv2d"

    def __init__(self, filters: int, kernel: int, stride: int = 1, padding="valid"):
        super().__init__()
        self.filters, self.kernel, self.stride = filters, kernel, stride
        if padding == "valid":
            padding = 0
        elif padding == "same":
            padding = (kernel - 1) // 2
        if not isinstance(padding, int) or padding < 0:
            raise ValueError("padding must be 'valid', 'same' or a non-negative integer")
        self.padding = padding

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ValueError(f"conv2d expects (C, H, W) inputs, got {in_shape}")
        c, h, w = in_shape
        oh = _conv_out(h, self.kernel, self.stride, self.padding)
        ow = _conv_out(w, self.kernel, self.stride, self.padding)
        if oh < 1 or ow < 1:
            raise ValueError(f"kernel {self.kernel} does not fit input {in_shape}")
        return (self.filters, oh, ow)

    def init_params(self, be, mode="secure", rng=None):
        c = self.in_shape[0]
        area = self.kernel * self.kernel
        d_in, d_out = c * area, self.filters * area
        shape = (c * area, self.filters)
        if mode == "secure":
            self.params["W"] = glorot_init(be, d_in, d_out, shape)
        else:
            self.params["W"] = _clear_glorot(be, rng, d_in, d_out, shape)
        self.params["b"] = be.zeros((self.filters,))

    def _patches(self, p: np.ndarray) -> np.ndarray:
        k, s, pad = self.kernel, self.stride, self.padding
        if pad:
            # np.pad would fill object (128-bit) arrays with numpy int64 zeros
            b, c, h, w = p.shape
            out = np.full((b, c, h + 2 * pad, w + 2 * pad), 0, dtype=p.dtype)
            out[:, :, pad:pad + h, pad:pad + w] = p
            p = out
        win = np.lib.stride_tricks.sliding_window_view(p, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        _, oh, ow = self.out_shape
        win = win[:, :, :oh, :ow]
        b, c = p.shape[:2]
        return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b * oh * ow, c * k * k)

    def _scatter(self, cols: np.ndarray, batch: int, ring) -> np.ndarray:
        c, h, w = self.in_shape
        k, s, pad = self.kernel, self.stride, self.padding
        _, oh, ow = self.out_shape
        hp, wp = h + 2 * pad, w + 2 * pad
        cols = cols.reshape(batch, oh, ow, c, k, k)
        out = ring.zeros((batch, c, hp, wp))
        for i in range(k):
            for j in range(k):
                blk = cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                out[:, :, i:i + s * oh:s, j:j + s * ow:s] = ring.wrap(out[:, :, i:i + s * oh:s, j:j + s * ow:s] + blk)
        return out[:, :, pad:pad + h, pad:pad + w]

    def forward(self, be, x, train=True):
        if x.shape[1:] != self.in_shape:
            raise ValueError(f"shape mismatch: expected (B, {self.in_shape}), got {x.shape}")
        batch = x.shape[0]
        cols = x.map(self._patches)
        self._cols, self._batch = cols, batch
        y = sm.fxmatmul(be, cols, self.params["W"])
        y = y + self.params["b"].broadcast_to(y.shape)
        _, oh, ow = self.out_shape
        return y.reshape(batch, oh, ow, self.filters).transpose(0, 3, 1, 2)

    def backward(self, be, dy, need_dx=True):
        batch = self._batch
        dyc = dy.transpose(0, 2, 3, 1).reshape(-1, self.filters)
        W = self.params["W"]
        pairs = [(self._cols.T, dyc)] + ([(dyc, W.T)] if need_dx else [])
        prods = be.matmul_many(pairs)
        self.grads["b"] = dyc.sum(axis=0)
        if not need_dx:
            self.grads["W"] = sm.trunc(be, prods[0], be.cfg.k + be.cfg.f, be.cfg.f)
            return None
        # patch gradients are summed back onto the input before one rounding
        dx_raw = prods[1].map(lambda p: self._scatter(p, batch, be.ring))
        gw, dx = sm.trunc_many(be, [prods[0], dx_raw], be.cfg.k + be.cfg.f, be.cfg.f)
        self.grads["W"] = gw
        return dx


class ReLU(Layer):
    kind = "relu"

    def forward(self, be, x, train=True):
        # x > 0 as (-x) < 0; the same comparison routes the gradient
        self._mask = be.bit2a(sm.ltz(be, -x))
        return be.mul(x, self._mask)

    def backward(self, be, dy, need_dx=True):
        if getattr(self, "_mask", None) is None:
            raise RuntimeError("relu backward called before forward")
        return be.mul(dy, self._mask)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, be, x, train=True):
        return x.reshape(x.shape[0], -1)

    def backward(self, be, dy, need_dx=True):
        return dy.reshape((dy.shape[0],) + self.in_shape)


class MaxPool2D(Layer):
    """Windowed maximum by a balanced tree of comparisons.

    Each tree level costs one comparison round over all pairs.  The
    position of the maximum is tracked as an arithmetic one-hot vector
    and reused to route gradients.
    """

    kind = "maxpool"

    def __init__(self, window: int = 2, stride: int | None = None):
        super().__init__()
        self.window = window
        self.stride = window if stride is None else stride

    def output_shape(self, in_shape):
        c, h, w = in_shape
        k, s = self.window, self.stride
        if s == k and (h % k or w % k):
            raise ValueError(f"input {h}x{w} is not divisible by window {k}")
        oh, ow = (h - k) // s + 1, (w - k) // s + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"window {k} does not fit input {in_shape}")
        return (c, oh, ow)

    def _index(self) -> np.ndarray:
        _, h, w = self.in_shape
        _, oh, ow = self.out_shape
        k, s = self.window, self.stride
        r = (np.arange(oh) * s)[:, None, None, None] + np.arange(k)[None, None, :, None]
        c = (np.arange(ow) * s)[None, :, None, None] + np.arange(k)[None, None, None, :]
        return (r * w + c).reshape(oh, ow, k * k)

    def forward(self, be, x, train=True):
        b, c = x.shape[:2]
        idx = self._index()
        self._idx, self._b = idx, b
        flat = x.reshape(b, c, -1)
        win = flat.map(lambda p: p[:, :, idx])
        cands = [(win[..., j], None) for j in range(win.shape[-1])]
        while len(cands) > 1:
            pairs = [(cands[i], cands[i + 1]) for i in range(0, len(cands) - 1, 2)]
            rest = [cands[-1]] if len(cands) % 2 else []
            a_vals = stack([p[0][0] for p in pairs], axis=0)
            b_vals = stack([p[1][0] for p in pairs], axis=0)
            sel = be.bit2a(sm.ltz(be, a_vals - b_vals))
            muls = [(sel, b_vals - a_vals)]
            for i, ((_, ia), (_, ib)) in enumerate(pairs):
                s_i = sel[i].expand_dims(-1)
                if ia is not None:
                    muls.append((s_i.broadcast_to(ia.shape), ia))
                if ib is not None:
                    muls.append((s_i.broadcast_to(ib.shape), ib))
            res = be.mul_many(muls)
            new_vals = a_vals + res[0]
            pos = 1
            merged = []
            for i, ((va, ia), (vb, ib)) in enumerate(pairs):
                s_i = sel[i].expand_dims(-1)
                if ia is None:
                    left = (-s_i).add_public(1)
                else:
                    left = ia - res[pos]
                    pos += 1
                if ib is None:
                    right = s_i
                else:
                    right = res[pos]
                    pos += 1
                merged.append((new_vals[i], concat([left, right], axis=-1)))
            cands = merged + rest
        out, ind = cands[0]
        self._ind = ind if ind is not None else be.public(1, out.shape + (1,))
        _, oh, ow = self.out_shape
        return out.reshape(b, c, oh, ow)

    def backward(self, be, dy, need_dx=True):
        b, c = self._b, self.in_shape[0]
        _, h, w = self.in_shape
        kk = self._ind.shape[-1]
        d = dy.reshape(b, c, self.out_shape[1], self.out_shape[2], 1).broadcast_to(self._ind.shape)
        routed = be.mul(d, self._ind)
        idx = self._idx

        def scatter(p):
            out = be.ring.zeros((b, c, h * w))
            for j in range(kk):
                tgt = idx[..., j].ravel()
                src = p[..., j].reshape(b, c, -1)
                # targets are distinct within one window slot
                out[:, :, tgt] = be.ring.wrap(out[:, :, tgt] + src)
            return out.reshape(b, c, h, w)

        return routed.map(scatter)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if rate < 0 or rate >= 1:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate

    def _scale(self, be, x):
        keep = 1.0 - self.rate
        lg = _log2_exact_float(keep)
        if lg is not None:
            return x << (-lg)
        return sm.fxmul_public(be, x, 1.0 / keep)

    def forward(self, be, x, train=True):
        if not train or self.rate == 0:
            self._keep = None
            return x
        self._keep = sm.bernoulli(be, 1.0 - self.rate, x.shape)
        return self._scale(be, be.mul(x, self._keep))

    def backward(self, be, dy, need_dx=True):
        if self._keep is None:
            return dy
        return self._scale(be, be.mul(dy, self._keep))


def _log2_exact_float(v: float) -> int | None:
    m, e = math.frexp(v)
    return e - 1 if m == 0.5 else None


class BatchNorm(Layer):
    """Normalization over the batch (and spatial positions for images).

    y = gamma (x - mean) / sqrt(var + eps) + beta with the inverse square
    root computed securely.  Inference uses running averages.
    """

    kind = "batchnorm"

    def __init__(self, eps: float = 2.0 ** -12, momentum: float = 0.1):
        super().__init__()
        self.eps, self.momentum = eps, momentum

    def init_params(self, be, mode="secure", rng=None):
        c = self.in_shape[0]
        self.params["gamma"] = be.public(be.encode(np.ones(c)))
        self.params["beta"] = be.zeros((c,))
        self.running_mean = be.zeros((c,))
        self.running_var = be.public(be.encode(np.ones(c)))

    def _axes(self, ndim):
        return (0,) if ndim == 2 else (0, 2, 3)

    def _bcast(self, v: ArithShare, shape) -> ArithShare:
        if len(shape) == 2:
            return v.broadcast_to(shape)
        return v.reshape(1, -1, 1, 1).broadcast_to(shape)

    def forward(self, be, x, train=True):
        axes = self._axes(x.ndim)
        if not train:
            istd = sm.invert_sqrt(be, self.running_var.add_public(be.encode(self.eps)))
            xhat = sm.fxmul(be, x - self._bcast(self.running_mean, x.shape), self._bcast(istd, x.shape))
            return self._affine(be, xhat)
        n = int(np.prod([x.shape[a] for a in axes]))
        if n < 2:
            raise ValueError("batch normalization needs at least two values per feature")
        mean = _mean(be, x.sum(axis=axes), n)
        xc = x - self._bcast(mean, x.shape)
        var = _mean(be, sm.fxmul(be, xc, xc).sum(axis=axes), n)
        istd = sm.invert_sqrt(be, var.add_public(be.encode(self.eps)))
        xhat = sm.fxmul(be, xc, self._bcast(istd, x.shape))
        self._xhat, self._istd, self._n = xhat, istd, n
        m = self.momentum
        self.running_mean, self.running_var = (
            sm.fxmul_public(be, self.running_mean, 1 - m) + sm.fxmul_public(be, mean, m),
            sm.fxmul_public(be, self.running_var, 1 - m) + sm.fxmul_public(be, var, m),
        )
        return self._affine(be, xhat)

    def _affine(self, be, xhat):
        y = sm.fxmul(be, xhat, self._bcast(self.params["gamma"], xhat.shape))
        return y + self._bcast(self.params["beta"], xhat.shape)

    def backward(self, be, dy, need_dx=True):
        axes = self._axes(dy.ndim)
        xhat, istd, n = self._xhat, self._istd, self._n
        gamma = self._bcast(self.params["gamma"], dy.shape)
        dxhat, dg = sm.fxmul_many(be, [(dy, gamma), (dy, xhat)])
        self.grads["beta"] = dy.sum(axis=axes)
        self.grads["gamma"] = dg.sum(axis=axes)
        if not need_dx:
            return None
        m1 = _mean(be, dxhat.sum(axis=axes), n)
        m2 = _mean(be, sm.fxmul(be, dxhat, xhat).sum(axis=axes), n)
        inner = dxhat - self._bcast(m1, dy.shape) - sm.fxmul(be, xhat, self._bcast(m2, dy.shape))
        return sm.fxmul(be, inner, self._bcast(istd, dy.shape))


# ----------------------------------------------------------------------
# loss

def row_max(be, x: ArithShare) -> ArithShare:
    """Maximum over the last axis by a balanced tree."""
    cols = [x[..., j] for j in range(x.shape[-1])]
    while len(cols) > 1:
        a = stack(cols[0:len(cols) - 1:2], axis=0)
        b = stack(cols[1:len(cols):2], axis=0)
        m, _ = sm.maximum(be, a, b)
        merged = [m[i] for i in range(m.shape[0])]
        if len(cols) % 2:
            merged.append(cols[-1])
        cols = merged
    return cols[0]


def softmax_xent_grad(be, logits: ArithShare, onehot: ArithShare, with_loss: bool = True):
    """Gradient softmax(x) - y per row, and per-sample cross-entropy.

    The row maximum is subtracted first so every exponential lies in
    (0, 1] and each row sum in [1, L].  ``onehot`` is at precision f.
    Returns (grad, loss) where loss holds one value per sample (or None).
    """
    if logits.shape[-1] == 0:
        raise ValueError("need at least one class")
    b, L = logits.shape
    mx = row_max(be, logits)
    z = logits - mx.expand_dims(1).broadcast_to(logits.shape)
    e = sm.exp_e(be, z)
    s = e.sum(axis=1)
    p = sm.div(be, e, s.expand_dims(1).broadcast_to(e.shape))
    grad = p - onehot
    if not with_loss:
        return grad, None
    f = be.cfg.f
    yx = sm.trunc(be, be.mul(onehot, logits).sum(axis=1), be.cfg.k + f + 4, f)
    loss = sm.ln(be, s) + mx - yx
    return grad, loss


# ----------------------------------------------------------------------
# optimizers

class Optimizer:
    def __init__(self, mode: str = "sgd", lr: float = 0.01, batch_size: int = 128,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float | None = None):
        if mode not in ("sgd", "adam", "amsgrad"):
            raise ConfigError(f"unknown optimizer {mode!r}")
        if mode == "sgd" and _log2_exact(batch_size) is None:
            raise ConfigError("sgd needs a power-of-two batch size")
        self.mode, self.lr, self.batch_size = mode, lr, batch_size
        self.beta1, self.beta2 = beta1, beta2
        self.eps = eps
        self.state: dict = {}
        self.steps = 0

    def _eps(self, be) -> float:
        if self.eps is not None:
            return self.eps
        return 1e-8 if be.cfg.f >= 32 else 2.0 ** -be.cfg.f

    def step(self, be, params: dict, grads: dict) -> dict:
        """Return updated parameters for batch-summed gradients."""
        keys = [key for key in params if key in grads]
        self.steps += 1
        if self.mode == "sgd":
            return self._sgd(be, params, grads, keys)
        return self._adam(be, params, grads, keys)

    def _sgd(self, be, params, grads, keys):
        k, f = be.cfg.k, be.cfg.f
        lg = _log2_exact(self.batch_size)
        lr_raw = int(be.encode(self.lr))
        scaled = [grads[key] * lr_raw for key in keys]
        deltas = sm.trunc_many(be, scaled, k + f, f + lg)
        out = dict(params)
        for key, d in zip(keys, deltas):
            out[key] = params[key] - d
        return out

    def _adam(self, be, params, grads, keys):
        b1, b2 = self.beta1, self.beta2
        out = dict(params)
        g_new, v_new = [], []
        for key in keys:
            g = grads[key]
            st = self.state.setdefault(key, {"m": be.zeros(g.shape), "v": be.zeros(g.shape)})
            g_new.append((st, g))
        ms = sm.trunc_many(
            be,
            [st["m"] * int(be.encode(b1)) + g * int(be.encode(1 - b1)) for st, g in g_new],
            be.cfg.k + be.cfg.f, be.cfg.f,
        )
        gs = sm.trunc_many(be, [g * int(be.encode(1 - b2)) for _, g in g_new], be.cfg.k + be.cfg.f, be.cfg.f)
        sq = sm.fxmul_many(be, [(a, g) for a, (_, g) in zip(gs, g_new)])
        vdec = sm.trunc_many(be, [st["v"] * int(be.encode(b2)) for st, _ in g_new], be.cfg.k + be.cfg.f, be.cfg.f)
        for (st, _), m, s2, vd in zip(g_new, ms, sq, vdec):
            st["m"] = m
            st["v"] = vd + s2
            v_new.append(st["v"])
        if self.mode == "amsgrad":
            vh = []
            for key, (st, _) in zip(keys, g_new):
                prev = st.get("vhat")
                st["vhat"] = st["v"] if prev is None else sm.maximum(be, prev, st["v"])[0]
                vh.append(st["vhat"])
            v_new = vh
        flat_v = concat([v.reshape(-1) for v in v_new])
        inv = sm.invert_sqrt(be, flat_v.add_public(be.encode(self._eps(be))))
        flat_m = concat([st["m"].reshape(-1) for st, _ in g_new])
        upd = sm.fxmul_public(be, sm.fxmul(be, flat_m, inv), self.lr)
        pos = 0
        for key in keys:
            n = params[key].size
            out[key] = params[key] - upd[pos:pos + n].reshape(params[key].shape)
            pos += n
        return out


def optimizer_step(be, state: Optimizer, params: dict, summed_grads: dict) -> dict:
    return state.step(be, params, summed_grads)


def shuffle_epoch(rng: np.random.Generator, n: int) -> np.ndarray:
    """Fisher-Yates shuffle of range(n)."""
    perm = np.arange(n)
    if n < 2:
        return perm
    draws = [int(rng.integers(0, i + 1)) for i in range(n - 1, 0, -1)]
    for i, j in zip(range(n - 1, 0, -1), draws):
        perm[i], perm[j] = perm[j], perm[i]
    return perm


# ----------------------------------------------------------------------
# models

class Sequential:
    def __init__(self, layers: list[Layer], in_shape: tuple, name: str = "model"):
        self.layers = layers
        self.name = name
        self.in_shape = tuple(in_shape)
        shape = self.in_shape
        for layer in layers:
            shape = layer.build(shape)
        self.out_shape = shape

    def init_params(self, be, mode: str = "secure", seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init_params(be, mode, rng)

    def forward(self, be, x: ArithShare, train: bool = True) -> ArithShare:
        for layer in self.layers:
            x = layer.forward(be, x, train)
        return x

    def backward(self, be, dy: ArithShare) -> None:
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            need = any(l.params for l in self.layers[:i])
            dy = layer.backward(be, dy, need_dx=need)
            if dy is None:
                break

    def named_params(self) -> dict[str, ArithShare]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, v in layer.params.items():
                out[f"{i}.{key}"] = v
        return out

    def named_grads(self) -> dict[str, ArithShare]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, v in layer.grads.items():
                out[f"{i}.{key}"] = v
        return out

    def set_params(self, params: dict[str, ArithShare]) -> None:
        for name, v in params.items():
            i, key = name.split(".", 1)
            self.layers[int(i)].params[key] = v

    def step(self, be, opt: Optimizer) -> None:
        self.set_params(opt.step(be, self.named_params(), self.named_grads()))

    def n_params(self) -> int:
        return sum(v.size for v in self.named_params().values())


def _dense_head(units=(100,)):
    out: list[Layer] = []
    for u in units:
        out += [Dense(u), ReLU()]
    return out + [Dense(10)]


def build_model(name: str, dropout: bool = False, in_shape: tuple | None = None) -> Sequential:
    """Networks A-D for 28x28 grey images and AlexNet for 32x32 colour images."""
    if name == "A":
        layers = [Flatten(), Dense(128), ReLU(), Dense(128), ReLU(), Dense(10)]
        shape = (1, 28, 28)
    elif name == "B":
        layers = [Conv2D(16, 5, 1, "same"), ReLU(), MaxPool2D(2),
                  Conv2D(16, 5, 1, "same"), ReLU(), MaxPool2D(2), Flatten()] + _dense_head()
        shape = (1, 28, 28)
    elif name == "C":
        layers = [Conv2D(20, 5, 1, "valid"), ReLU(), MaxPool2D(2),
                  Conv2D(50, 5, 1, "valid"), ReLU(), MaxPool2D(2), Flatten()]
        if dropout:
            layers.append(Dropout(0.5))
        layers += _dense_head()
        shape = (1, 28, 28)
    elif name == "D":
        layers = [Conv2D(5, 5, 2, "same"), ReLU(), Flatten()] + _dense_head()
        shape = (1, 28, 28)
    elif name == "alexnet":
        layers = [Conv2D(96, 11, 4, 9), ReLU(), MaxPool2D(3, 2), BatchNorm(),
                  Conv2D(256, 5, 1, 1), ReLU(), BatchNorm(), MaxPool2D(2, 1),
                  Conv2D(384, 3, 1, 1), ReLU(),
                  Conv2D(384, 3, 1, 1), ReLU(),
                  Conv2D(256, 3, 1, 1), ReLU(), Flatten()] + _dense_head((256, 256))
        shape = (3, 32, 32)
    else:
        raise ValueError(f"unknown model {name!r}")
    return Sequential(layers, in_shape or shape, name)
