"""The filtering model: layer fusion, prediction network, pooling heads.

A frozen external encoder supplies per-layer feature stacks
[layers, frames, enc_dim].  This module learns (1) softmax-normalized
fusion weights over the layers, (2) a transformer that maps the fused
[frames, enc_dim] sequence to [frames, model_dim], and (3) one
attention-pooling head per class that reduces the sequence to a logit.
Training minimizes mean binary cross-entropy over the class outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T
from .errors import ConfigError, DataError, NonFiniteError
from .labels import CLASS_NAMES
from .nn import Dropout, LayerNorm, Linear, Module, ModuleList, TransformerLayer, sinusoidal_positions
from .optim import Adam
from .tensor import Tensor
from .tensorfile import read_tensors, write_tensors

CHECKPOINT_VERSION = 1
PROB_CLAMP = 1e-7


@dataclass
class ModelConfig:
    n_classes: int = 5
    encoder_layers: int = 12
    frames: int = 1500
    enc_dim: int = 768
    model_dim: int = 256
    tf_layers: int = 4
    tf_heads: int = 4
    ff_dim: int = 1024
    dropout_p: float = 0.1
    positional: bool = True

    def __post_init__(self):
        if self.n_classes < 1:
            raise ConfigError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.model_dim % self.tf_heads != 0:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by tf_heads {self.tf_heads}"
            )

    def as_text(self):
        lines = [f"model.{f.name}={getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_items(cls, items):
        kwargs = {}
        casts = {f.name: f.type for f in fields(cls)}
        for name, raw in items:
            if name not in casts:
                raise ConfigError(f"unknown model config key '{name}'")
            if casts[name] == "bool" or casts[name] is bool:
                kwargs[name] = raw in (True, "True", "true", "1")
            elif casts[name] == "float" or casts[name] is float:
                kwargs[name] = float(raw)
            else:
                kwargs[name] = int(raw)
        return cls(**kwargs)


class AttentionPoolHead(Module):
    """Softmax attention over time plus a temporal-mean residual.

    scores = linear2(dropout(relu(linear1(F)))), a = softmax over frames,
    pooled = a^T F, logit = linear_out(pooled + mean_t(F)).  The mean
    residual is added in feature space before the final projection.
    """

    def __init__(self, dim, dropout_p, rng, dtype=np.float32):
        super().__init__()
        self.lin1 = Linear(dim, dim, rng, dtype)
        self.lin2 = Linear(dim, 1, rng, dtype)
        self.lin_out = Linear(dim, 1, rng, dtype)
        self.drop = Dropout(dropout_p)

    def __call__(self, f, rng=None):
        b, t, d = f.shape
        scores = self.lin2(self.drop(T.relu(self.lin1(f)), rng))  # [B, T, 1]
        attn = T.softmax(scores, axis=1)
        pooled = T.reshape(T.matmul(T.transpose(attn, (0, 2, 1)), f), (b, d))
        logit = self.lin_out(pooled + f.mean(axis=1))  # [B, 1]
        return logit, attn


class Whilter(Module):
    """Fusion weights + prediction network + one pooling head per class."""

    def __init__(self, config, rng, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = np.dtype(dtype)
        self.fusion_raw = Tensor(
            np.zeros(config.encoder_layers, dtype=dtype), requires_grad=True
        )
        self.input_proj = Linear(config.enc_dim, config.model_dim, rng, dtype)
        self.pos_table = sinusoidal_positions(config.frames, config.model_dim, dtype)
        self.blocks = ModuleList(
            TransformerLayer(
                config.model_dim, config.tf_heads, config.ff_dim,
                config.dropout_p, rng, dtype,
            )
            for _ in range(config.tf_layers)
        )
        self.final_norm = LayerNorm(config.model_dim, dtype=dtype)
        self.heads = ModuleList(
            AttentionPoolHead(config.model_dim, config.dropout_p, rng, dtype)
            for _ in range(config.n_classes)
        )

    def fusion_weights(self):
        """Effective (softmax-normalized) layer weights as a Tensor."""
        return T.softmax(self.fusion_raw, axis=-1)

    def fuse(self, stacks):
        stacks = np.asarray(stacks)
        if stacks.ndim == 3:
            stacks = stacks[None]
        if stacks.ndim != 4 or stacks.shape[1] != self.config.encoder_layers:
            raise DataError(
                f"expected stacks [batch, {self.config.encoder_layers}, frames, dim], "
                f"got shape {stacks.shape}"
            )
        return T.layer_weighted_sum(self.fusion_weights(), stacks)

    def encode_sequence(self, stacks, rng=None):
        """Fused features through the transformer: [B, frames, model_dim]."""
        x = self.input_proj(self.fuse(stacks))
        if self.config.positional:
            t = x.shape[1]
            x = x + Tensor(self.pos_table[:t])
        for block in self.blocks:
            x = block(x, rng)
        return self.final_norm(x)

    def forward(self, stacks, rng=None):
        """Logits [B, n_classes] in fixed class order."""
        f = self.encode_sequence(stacks, rng)
        logits = [head(f, rng)[0] for head in self.heads]
        return T.concat(logits, axis=1)

    def predict(self, stacks):
        """Eval-mode class probabilities as a float64 array [B, n_classes]."""
        was_training = self.training
        self.eval()
        try:
            logits = self.forward(stacks).data.astype(np.float64)
        finally:
            self.train(was_training)
        out = np.empty_like(logits)
        pos = logits >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
        ez = np.exp(logits[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out


def bce_loss(probs, targets):
    """Mean over classes (and batch) of binary cross-entropy.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs and the
    reduction runs in float64 so symmetric cases hit their closed forms
    (uniform 0.5 predictions give exactly ln 2 to 1e-9).
    """
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != probs.shape:
        raise DataError(f"target shape {y.shape} does not match predictions {probs.shape}")
    p = T.cast(T.clamp(probs, PROB_CLAMP, 1.0 - PROB_CLAMP), np.float64)
    ll = T.log(p) * y + T.log(1.0 - p) * (1.0 - y)
    return -ll.mean()


def train_step(model, optimizer, stacks, targets, rng=None):
    """One optimization step; returns the pre-update batch loss."""
    model.train()
    logits = model.forward(stacks, rng)
    loss = bce_loss(T.sigmoid(logits), targets)
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteError(
            f"training loss is not finite ({value}); "
            f"batch shape {np.asarray(stacks).shape}, lr {optimizer.lr}"
        )
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return value


# -- checkpoints --------------------------------------------------------------
#
# A checkpoint is a directory:
#   config      key=value text: checkpoint version, epoch, class order,
#               and every ModelConfig field (prefixed "model.")
#   params      named-tensor container with all learnable parameters
#   optim       named-tensor container with Adam moments and step counter
#   rng         JSON dump of the run generator's bit-generator state


def save_checkpoint(path, model, optimizer=None, rng=None, epoch=0):
    os.makedirs(path, exist_ok=True)
    lines = [
        f"checkpoint_version={CHECKPOINT_VERSION}",
        f"epoch={epoch}",
        f"class_order={','.join(CLASS_NAMES)}",
        model.config.as_text().rstrip("\n"),
    ]
    with open(os.path.join(path, "config"), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    write_tensors(model.state(), os.path.join(path, "params"))
    if optimizer is not None:
        write_tensors(optimizer.state(), os.path.join(path, "optim"))
    if rng is not None:
        with open(os.path.join(path, "rng"), "w", encoding="utf-8") as f:
            json.dump(rng.bit_generator.state, f)


def read_checkpoint_config(path):
    model_items = []
    meta = {}
    with open(os.path.join(path, "config"), encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            if key.startswith("model."):
                model_items.append((key[len("model."):], value))
            else:
                meta[key] = value
    version = int(meta.get("checkpoint_version", -1))
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {version}")
    return ModelConfig.from_items(model_items), int(meta.get("epoch", 0))


def load_checkpoint(path, expect_config=None, lr=0.0, dtype=np.float32):
    """Rebuild (model, optimizer, rng, epoch) from a checkpoint directory.

    ``expect_config`` guards against silently loading a structurally
    different model into an existing run.  The optimizer comes back only
    if the checkpoint stored one; likewise the RNG.
    """
    config, epoch = read_checkpoint_config(path)
    if expect_config is not None and config != expect_config:
        raise ConfigError(
            f"{path}: checkpoint config {config} does not match expected {expect_config}"
        )
    model = Whilter(config, rng=np.random.default_rng(0), dtype=dtype)
    model.load_state(read_tensors(os.path.join(path, "params")))

    optimizer = None
    optim_path = os.path.join(path, "optim")
    if os.path.exists(optim_path):
        optimizer = Adam(model.parameters(), lr=lr)
        optimizer.load_state(read_tensors(optim_path))

    rng = None
    rng_path = os.path.join(path, "rng")
    if os.path.exists(rng_path):
        with open(rng_path, encoding="utf-8") as f:
            state = json.load(f)
        rng = np.random.default_rng(0)
        rng.bit_generator.state = state
    return model, optimizer, rng, epoch
