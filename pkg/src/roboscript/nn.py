"""Minimal reverse-mode autodiff over numpy float64 arrays.

Just enough machinery for LSTM seq2seq models with attention: elementwise
arithmetic with broadcasting, 2-D matmul, gather/stack/slice/reshape, fused
softmax and loss ops, and Adam. Everything runs in float64 so the same code
paths serve both training and finite-difference gradient checking.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def backward(self):
        order = []
        seen = set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None:
                t._backward(t.grad)

    def _accum(self, grad):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other))
        def back(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))
        out._backward = back
        return out

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other))
        def back(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))
        out._backward = back
        return out

    def __neg__(self):
        return self * Tensor(-1.0)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, parents=(self, other))
        def back(g):
            self._accum(g @ other.data.T)
            other._accum(self.data.T @ g)
        out._backward = back
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def tanh(t: Tensor) -> Tensor:
    y = np.tanh(t.data)
    out = Tensor(y, parents=(t,))
    out._backward = lambda g: t._accum(g * (1.0 - y * y))
    return out


def sigmoid(t: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-t.data))
    out = Tensor(y, parents=(t,))
    out._backward = lambda g: t._accum(g * y * (1.0 - y))
    return out


def relu(t: Tensor) -> Tensor:
    y = np.maximum(t.data, 0.0)
    out = Tensor(y, parents=(t,))
    out._backward = lambda g: t._accum(g * (t.data > 0.0))
    return out


def concat(tensors, axis=1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    def back(g):
        start = 0
        for t, size in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + size)
            t._accum(g[tuple(sl)])
            start += size
    out._backward = back
    return out


def cols(t: Tensor, a: int, b: int) -> Tensor:
    out = Tensor(t.data[:, a:b], parents=(t,))
    def back(g):
        full = np.zeros_like(t.data)
        full[:, a:b] = g
        t._accum(full)
    out._backward = back
    return out


def rows(weight: Tensor, idx) -> Tensor:
    """Embedding lookup: weight[idx] with scatter-add backward."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(weight.data[idx], parents=(weight,))
    def back(g):
        if weight.requires_grad:
            if weight.grad is None:
                weight.grad = np.zeros_like(weight.data)
            np.add.at(weight.grad, idx, g)
    out._backward = back
    return out


def stack(tensors, axis=1) -> Tensor:
    out = Tensor(np.stack([t.data for t in tensors], axis=axis),
                 parents=tuple(tensors))
    def back(g):
        for i, t in enumerate(tensors):
            t._accum(np.take(g, i, axis=axis))
    out._backward = back
    return out


def reshape(t: Tensor, shape) -> Tensor:
    out = Tensor(t.data.reshape(shape), parents=(t,))
    out._backward = lambda g: t._accum(g.reshape(t.data.shape))
    return out


def sum_axis(t: Tensor, axis: int) -> Tensor:
    out = Tensor(t.data.sum(axis=axis), parents=(t,))
    out._backward = lambda g: t._accum(np.expand_dims(g, axis=axis) *
                                       np.ones_like(t.data))
    return out


def softmax(t: Tensor, axis=-1) -> Tensor:
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, parents=(t,))
    def back(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        t._accum((g - dot) * y)
    out._backward = back
    return out


def cross_entropy_sum(logits: Tensor, targets, mask=None) -> Tensor:
    """Sum over rows of -log softmax(logits)[target], rows weighted by mask."""
    targets = np.asarray(targets, dtype=np.intp)
    m = np.ones(len(targets)) if mask is None else np.asarray(mask, dtype=np.float64)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    nll = logz - shifted[np.arange(len(targets)), targets]
    out = Tensor((nll * m).sum(), parents=(logits,))
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    def back(g):
        d = probs.copy()
        d[np.arange(len(targets)), targets] -= 1.0
        logits._accum(g * d * m[:, None])
    out._backward = back
    return out


def mse_sum(pred: Tensor, target, mask=None) -> Tensor:
    """Sum of squared errors; mask broadcasts over pred's shape."""
    tgt = np.asarray(target, dtype=np.float64)
    m = np.ones_like(tgt) if mask is None else np.broadcast_to(
        np.asarray(mask, dtype=np.float64), tgt.shape)
    diff = (pred.data - tgt) * m
    out = Tensor((diff * diff).sum(), parents=(pred,))
    out._backward = lambda g: pred._accum(g * 2.0 * diff * m)
    return out


def bce_logits_sum(logits: Tensor, target, mask=None) -> Tensor:
    """Numerically stable binary cross-entropy from logits, summed."""
    tgt = np.asarray(target, dtype=np.float64)
    m = np.ones_like(tgt) if mask is None else np.broadcast_to(
        np.asarray(mask, dtype=np.float64), tgt.shape)
    x = logits.data
    loss = np.maximum(x, 0.0) - x * tgt + np.log1p(np.exp(-np.abs(x)))
    out = Tensor((loss * m).sum(), parents=(logits,))
    sig = 1.0 / (1.0 + np.exp(-x))
    out._backward = lambda g: logits._accum(g * (sig - tgt) * m)
    return out


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """x @ W + b as one tape node."""
    out = Tensor(x.data @ W.data + b.data, parents=(x, W, b))
    def back(g):
        x._accum(g @ W.data.T)
        W._accum(x.data.T @ g)
        b._accum(g.sum(axis=0))
    out._backward = back
    return out


def lstm_step(x: Tensor, h: Tensor, c: Tensor, W: Tensor, b: Tensor, hidden: int):
    """One LSTM cell step fused into a single tape node (gate order
    i, f, o, g). Returns (h2, c2) as column views of the node."""
    H = hidden
    zcat = np.concatenate([x.data, h.data], axis=1)
    z = zcat @ W.data + b.data
    sig = 1.0 / (1.0 + np.exp(-z[:, :3 * H]))
    i, f, o = sig[:, :H], sig[:, H:2 * H], sig[:, 2 * H:]
    g = np.tanh(z[:, 3 * H:])
    c2 = f * c.data + i * g
    tc2 = np.tanh(c2)
    h2 = o * tc2
    out = Tensor(np.concatenate([h2, c2], axis=1), parents=(x, h, c, W, b))

    def back(grad):
        dh2 = grad[:, :H]
        dc2 = grad[:, H:].copy()
        do = dh2 * tc2
        dc2 += dh2 * o * (1.0 - tc2 * tc2)
        di = dc2 * g
        df = dc2 * c.data
        dg = dc2 * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ], axis=1)
        dzcat = dz @ W.data.T
        x._accum(dzcat[:, :x.data.shape[1]])
        h._accum(dzcat[:, x.data.shape[1]:])
        c._accum(dc2 * f)
        W._accum(zcat.T @ dz)
        b._accum(dz.sum(axis=0))

    out._backward = back
    return cols(out, 0, H), cols(out, H, 2 * H)


def attend_general(h: Tensor, Wa: Tensor, enc_states: Tensor,
                   mask_bias: np.ndarray) -> Tensor:
    """Fused bilinear attention: softmax((h Wa) . states + bias)-weighted
    sum of states. Returns (context node, normalized alignment as plain
    numpy with no grad path of its own)."""
    q = h.data @ Wa.data                                   # (B, H)
    scores = np.einsum("bh,bsh->bs", q, enc_states.data)
    shifted = scores + mask_bias
    shifted -= shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    a = e / e.sum(axis=1, keepdims=True)                   # (B, S)
    context = np.einsum("bs,bsh->bh", a, enc_states.data)
    out = Tensor(context, parents=(h, Wa, enc_states))

    def back(dc):
        da = np.einsum("bh,bsh->bs", dc, enc_states.data)
        dmasked = (da - (da * a).sum(axis=1, keepdims=True)) * a
        dq = np.einsum("bs,bsh->bh", dmasked, enc_states.data)
        dHs = a[:, :, None] * dc[:, None, :] \
            + dmasked[:, :, None] * q[:, None, :]
        h._accum(dq @ Wa.data.T)
        Wa._accum(h.data.T @ dq)
        enc_states._accum(dHs)

    out._backward = back
    return out, a


def masked_select(new: Tensor, old: Tensor, mask: np.ndarray) -> Tensor:
    """new * mask + old * (1 - mask) as one node; mask has no grad."""
    out = Tensor(new.data * mask + old.data * (1.0 - mask),
                 parents=(new, old))
    def back(g):
        new._accum(g * mask)
        old._accum(g * (1.0 - mask))
    out._backward = back
    return out


def init_uniform(rng, shape, scale=0.08) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


def lstm_init(rng, in_dim: int, hidden: int):
    """Fused (in+hidden, 4*hidden) weight, zero bias with forget gate at +1."""
    W = init_uniform(rng, (in_dim + hidden, 4 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return W, b


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mhat = self.m[i] / (1 - self.beta1 ** self.t)
            vhat = self.v[i] / (1 - self.beta2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
