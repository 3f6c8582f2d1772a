"""Adam optimizer and the exponential learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .backend import kernels
from .errors import NonFiniteError


class Adam:
    """Adam with bias correction over a name -> Tensor parameter dict.

    Moment buffers are keyed by parameter name so they serialize next to
    the parameters and survive a save/load round trip.  ``step`` raises
    ``NonFiniteError`` naming the offending parameter if a gradient or an
    updated value stops being finite, so a diverging run fails loudly at
    the first bad update instead of filling checkpoints with NaN.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient for parameter '{name}'")
            kernels.adam_update(
                p.data, np.ascontiguousarray(g), self.m[name], self.v[name],
                self.t, self.lr, self.beta1, self.beta2, self.eps,
            )
            if not np.all(np.isfinite(p.data)):
                raise NonFiniteError(f"non-finite value in parameter '{name}' after update")

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state(self):
        """Serializable snapshot: moment buffers plus the step counter."""
        out = {"t": np.array([self.t], dtype=np.float64)}
        for name in self.params:
            out[f"m.{name}"] = self.m[name].copy()
            out[f"v.{name}"] = self.v[name].copy()
        return out

    def load_state(self, state):
        self.t = int(np.asarray(state["t"]).reshape(-1)[0])
        for name in self.params:
            self.m[name][...] = state[f"m.{name}"]
            self.v[name][...] = state[f"v.{name}"]


def lr_at(epoch, eta, gamma):
    """lr = eta * gamma**epoch, computed in float64; epoch counts from 0."""
    return float(eta) * float(gamma) ** int(epoch)
