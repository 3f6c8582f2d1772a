"""Composable layers on top of the autodiff tensors.

A ``Module`` collects parameters from its attributes (tensors with
``requires_grad`` set, nested modules, ``ModuleList``s) and exposes them
as a flat name -> Tensor mapping for the optimizer and the checkpoint
writer.  Parameter initialization takes an explicit
``numpy.random.Generator`` so construction order plus seed fully
determines the weights.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .tensor import Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, (Module, ModuleList)):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def parameters(self):
        """Flat dict of dotted parameter names to tensors, in registration order."""
        out = {}
        for name, p in self._params.items():
            out[name] = p
        for name, child in self._children.items():
            for sub, p in child.parameters().items():
                out[f"{name}.{sub}"] = p
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    def train(self, mode=True):
        object.__setattr__(self, "training", mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def load_state(self, state):
        """Copy values from a name -> ndarray mapping into the parameters.

        Every parameter must be present with the right shape; extra keys
        are an error, so a truncated or mismatched checkpoint cannot load
        silently.
        """
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise KeyError(f"state mismatch: missing={missing} unexpected={extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for '{name}': {arr.shape} vs {p.data.shape}")
            p.data[...] = arr

    def state(self):
        return {name: p.data.copy() for name, p in self.parameters().items()}


class ModuleList:
    def __init__(self, modules=()):
        self._modules = list(modules)

    def __iter__(self):
        return iter(self._modules)

    def __len__(self):
        return len(self._modules)

    def __getitem__(self, i):
        return self._modules[i]

    def append(self, module):
        self._modules.append(module)

    def parameters(self):
        out = {}
        for i, m in enumerate(self._modules):
            for sub, p in m.parameters().items():
                out[f"{i}.{sub}"] = p
        return out

    def train(self, mode=True):
        for m in self._modules:
            m.train(mode)
        return self


class Linear(Module):
    """Affine map x @ W + b with W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0."""

    def __init__(self, in_dim, out_dim, rng, dtype=np.float32):
        super().__init__()
        bound = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-bound, bound, size=(in_dim, out_dim)).astype(dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return T.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.eps = eps
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return T.layer_norm(x, self.gain, self.bias, self.eps)


class Dropout(Module):
    def __init__(self, p):
        super().__init__()
        if not (0.0 <= p < 1.0):
            raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p

    def __call__(self, x, rng=None):
        return T.dropout(x, self.p, rng, self.training)


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention with ``heads`` parallel heads."""

    def __init__(self, dim, heads, rng, dtype=np.float32):
        super().__init__()
        if dim % heads != 0:
            raise ConfigError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = Linear(dim, dim, rng, dtype)
        self.k_proj = Linear(dim, dim, rng, dtype)
        self.v_proj = Linear(dim, dim, rng, dtype)
        self.out_proj = Linear(dim, dim, rng, dtype)

    def _split(self, x, b, t):
        # [B, T, D] -> [B, H, T, Dh]
        return T.transpose(T.reshape(x, (b, t, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(self, x):
        b, t, _ = x.shape
        q = self._split(self.q_proj(x), b, t)
        k = self._split(self.k_proj(x), b, t)
        v = self._split(self.v_proj(x), b, t)
        scale = 1.0 / np.sqrt(self.head_dim)
        scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), scale)
        attn = T.softmax(scores, axis=-1)
        ctx = T.matmul(attn, v)  # [B, H, T, Dh]
        merged = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (b, t, self.dim))
        return self.out_proj(merged)


class TransformerLayer(Module):
    """Pre-norm encoder block: x + MHA(LN(x)), then x + FF(LN(x))."""

    def __init__(self, dim, heads, ff_dim, dropout, rng, dtype=np.float32):
        super().__init__()
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.ff1 = Linear(dim, ff_dim, rng, dtype)
        self.ff2 = Linear(ff_dim, dim, rng, dtype)
        self.drop = Dropout(dropout)

    def __call__(self, x, rng=None):
        x = x + self.drop(self.attn(self.norm1(x)), rng)
        x = x + self.drop(self.ff2(T.gelu(self.ff1(self.norm2(x)))), rng)
        return x


def sinusoidal_positions(frames, dim, dtype=np.float32):
    """Fixed sin/cos position table of shape [frames, dim].

    Even columns carry sin, odd columns cos, with the usual 10000^(2i/d)
    wavelength ladder.
    """
    pos = np.arange(frames, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((frames, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table.astype(dtype)
