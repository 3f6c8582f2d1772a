"""Dense-tensor numerics with reverse-mode automatic differentiation.

Tensors wrap C-order NumPy arrays of float32 (training) or float64
(gradient-check mode).  Each operation records its inputs and a backward
closure; ``Tensor.backward`` walks the tape in reverse topological order
and accumulates gradients into ``.grad`` buffers (plain ndarrays).

Limited NumPy-style broadcasting is supported internally (bias adds,
scalar constants); gradients of broadcast operands are sum-reduced back
to the operand shape.  Stochastic ops (dropout) take an explicit
``numpy.random.Generator`` so runs are bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import numpy as np

from .backend import kernels
from .errors import ConfigError, NonFiniteError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data.copy()

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        flags = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flags})"

    # -- graph plumbing ------------------------------------------------
    def _needs_tape(self):
        return self.requires_grad or self._parents

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Reverse-mode sweep seeding this (scalar) tensor with ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed requires a scalar loss")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.data.shape:
                raise ValueError("seed gradient shape mismatch")

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p._needs_tape():
                    stack.append((p, False))

        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(as_tensor(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)


def as_tensor(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _coerce(a, b):
    """Promote operands of a binary op; mixed Tensor dtypes are an error.

    Plain scalars/arrays are cast to the Tensor operand's dtype so the
    float32 training path never upcasts silently.
    """
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        if a.dtype != b.dtype:
            raise TypeError(f"mixed tensor dtypes {a.dtype} and {b.dtype}; cast explicitly")
        return a, b
    if isinstance(a, Tensor):
        return a, as_tensor(b, a.dtype)
    return as_tensor(a, b.dtype), b


def _make(data, parents, backward):
    out = Tensor(data)
    live = tuple(p for p in parents if p._needs_tape())
    if live:
        out._parents = live
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ts) in enumerate(zip(g.shape, shape)) if ts == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ----------------------------------------------------------

def add(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        if a._needs_tape():
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b._needs_tape():
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        if a._needs_tape():
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b._needs_tape():
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        if a._needs_tape():
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b._needs_tape():
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(a.data / b.data, (a, b), backward)


def matmul(a, b):
    """Matrix product with NumPy batch semantics on the leading axes."""

    def backward(g):
        if a._needs_tape():
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b._needs_tape():
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _make(a.data @ b.data, (a, b), backward)


# -- shape ops -----------------------------------------------------------

def reshape(x, shape):
    old = x.data.shape

    def backward(g):
        x._accumulate(g.reshape(old))

    return _make(np.ascontiguousarray(x.data.reshape(shape)), (x,), backward)


def transpose(x, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        x._accumulate(np.transpose(g, inv))

    return _make(np.ascontiguousarray(np.transpose(x.data, axes)), (x,), backward)


def concat(tensors, axis):
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t._needs_tape():
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


# -- reductions ------------------------------------------------------------

def reduce_sum(x, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape))

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def reduce_mean(x, axis=None, keepdims=False):
    if axis is None:
        count = x.data.size
    else:
        count = x.data.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.data.shape) / x.dtype.type(count))

    return _make(x.data.mean(axis=axis, keepdims=keepdims), (x,), backward)


# -- elementwise nonlinearities -------------------------------------------

def relu(x):
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)

    return _make(np.where(mask, x.data, x.dtype.type(0)), (x,), backward)


def gelu(x):
    xc = np.ascontiguousarray(x.data)

    def backward(g):
        x._accumulate(kernels.gelu_bwd(xc, np.ascontiguousarray(g)))

    return _make(kernels.gelu_fwd(xc), (x,), backward)


def tanh(x):
    y = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - y * y))

    return _make(y, (x,), backward)


def sigmoid(x):
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-x.data))
    y = y.astype(x.dtype, copy=False)

    def backward(g):
        x._accumulate(g * y * (1.0 - y))

    return _make(y, (x,), backward)


def exp(x):
    y = np.exp(x.data)

    def backward(g):
        x._accumulate(g * y)

    return _make(y, (x,), backward)


def log(x):
    def backward(g):
        x._accumulate(g / x.data)

    return _make(np.log(x.data), (x,), backward)


def clamp(x, lo, hi):
    inside = (x.data >= lo) & (x.data <= hi)

    def backward(g):
        x._accumulate(g * inside)

    return _make(np.clip(x.data, lo, hi), (x,), backward)


def cast(x, dtype):
    dtype = np.dtype(dtype)
    src = x.dtype

    def backward(g):
        x._accumulate(g.astype(src))

    return _make(x.data.astype(dtype), (x,), backward)


# -- structured primitives --------------------------------------------------

def softmax(x, axis=-1):
    """Shift-invariant softmax along ``axis``."""
    if x.data.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    moved = np.moveaxis(x.data, axis, -1)
    rows = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    y2 = kernels.softmax_fwd(rows)
    y = np.moveaxis(y2.reshape(moved.shape), -1, axis)

    def backward(g):
        g2 = np.ascontiguousarray(np.moveaxis(g, axis, -1).reshape(rows.shape))
        gx2 = kernels.softmax_bwd(y2, g2)
        x._accumulate(np.moveaxis(gx2.reshape(moved.shape), -1, axis))

    return _make(np.ascontiguousarray(y), (x,), backward)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.data.shape[-1]
    rows = np.ascontiguousarray(x.data.reshape(-1, d))
    y2, mean, rstd = kernels.layer_norm_fwd(rows, gain.data, bias.data, eps)

    def backward(g):
        g2 = np.ascontiguousarray(g.reshape(-1, d))
        gx2, ggain, gbias = kernels.layer_norm_bwd(rows, gain.data, mean, rstd, g2)
        if x._needs_tape():
            x._accumulate(gx2.reshape(x.data.shape))
        if gain._needs_tape():
            gain._accumulate(ggain)
        if bias._needs_tape():
            bias._accumulate(gbias)

    return _make(y2.reshape(x.data.shape), (x, gain, bias), backward)


def dropout(x, p, rng, training):
    """Inverted dropout: scales by 1/(1-p) at train time, identity at eval."""
    if not (0.0 <= p < 1.0):
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout requires an RNG")
    keep = (rng.random(x.data.shape) >= p).astype(x.dtype)
    keep /= x.dtype.type(1.0 - p)

    def backward(g):
        x._accumulate(g * keep)

    return _make(x.data * keep, (x,), backward)


def layer_weighted_sum(w, stack):
    """Contract per-layer weights with a constant [B, L, T, D] feature stack.

    Gradients flow to ``w`` only; the stack is treated as frozen input.
    Implemented as a dedicated primitive so no [B, L, T, D]-sized
    intermediate is materialized.
    """
    s = np.asarray(stack)
    if w.data.ndim != 1 or s.ndim != 4 or s.shape[1] != w.data.shape[0]:
        raise ValueError(
            f"expected weights (L,) and stack (B, L, T, D) with matching L; "
            f"got {w.data.shape} and {s.shape}"
        )

    def backward(g):
        w._accumulate(np.einsum("btd,bltd->l", g, s, optimize=True).astype(w.dtype))

    return _make(np.einsum("l,bltd->btd", w.data, s, optimize=True), (w,), backward)


# -- verification -----------------------------------------------------------

def grad_check(loss_fn, params, h=1e-4, floor=1e-8):
    """Worst relative error of reverse-mode gradients vs central differences.

    ``loss_fn`` must be a deterministic closure over ``params`` (a mapping
    of name -> Tensor) returning a scalar Tensor.  All parameters must be
    float64; the 32-bit training path is not accurate enough for h=1e-4
    stencils.
    """
    for name, p in params.items():
        if p.dtype != np.float64:
            raise TypeError(f"grad_check requires float64 parameters; '{name}' is {p.dtype}")

    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    val = loss.item()
    if not np.isfinite(val):
        raise NonFiniteError(f"loss is not finite: {val}")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().item()
            flat[i] = orig - h
            f_minus = loss_fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(ana[i]), abs(numeric))
            err = abs(ana[i] - numeric) if denom < floor else abs(ana[i] - numeric) / denom
            if err > worst:
                worst = err
    return worst
