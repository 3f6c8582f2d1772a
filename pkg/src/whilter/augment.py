"""Waveform augmentations for the fine-tuning stage.

Five corruptions, each applied independently with probability ``prob``:
frequency band dropping, frame dropping, bit-resolution reduction, sign
flip, and speed perturbation.  All preserve length exactly.  Draws come
from the caller's RNG in a fixed order (the apply/skip coin first, then
the parameters of applied ops), so a seeded run is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import SAMPLE_RATE


@dataclass
class AugmentConfig:
    prob: float = 0.2
    max_band_hz: float = 1000.0
    frame_drop_min_s: float = 0.05
    frame_drop_max_s: float = 0.2
    bit_choices: tuple = (8, 9, 10, 11, 12, 13, 14)
    speed_factors: tuple = (0.9, 1.1)
    sample_rate: int = SAMPLE_RATE


def freq_drop(w, rng, cfg):
    """Zero one contiguous rFFT band of random width up to ``max_band_hz``."""
    spec = np.fft.rfft(w)
    nyquist = cfg.sample_rate / 2.0
    hz_per_bin = nyquist / (spec.size - 1)
    width_hz = float(rng.uniform(0.0, cfg.max_band_hz))
    width = max(1, int(round(width_hz / hz_per_bin)))
    start = int(rng.integers(0, max(1, spec.size - width)))
    spec[start:start + width] = 0.0
    return np.fft.irfft(spec, n=w.size).astype(np.float32)


def frame_drop(w, rng, cfg):
    """Zero 1-3 random segments of 50-200 ms."""
    out = w.copy()
    n_seg = int(rng.integers(1, 4))
    for _ in range(n_seg):
        dur = float(rng.uniform(cfg.frame_drop_min_s, cfg.frame_drop_max_s))
        length = min(out.size, max(1, int(round(dur * cfg.sample_rate))))
        start = int(rng.integers(0, out.size - length + 1))
        out[start:start + length] = 0.0
    return out


def bit_reduce(w, rng, cfg):
    """Quantize to b bits over [-1, 1]: step 2/2^b, max error 2^-b."""
    b = int(cfg.bit_choices[rng.integers(0, len(cfg.bit_choices))])
    step = np.float32(2.0 ** (1 - b))
    return (np.round(w / step) * step).astype(np.float32)


def sign_flip(w, rng, cfg):
    return -w


def speed_perturb(w, rng, cfg):
    """Resample by a factor from ``speed_factors``, then pad/truncate back."""
    factor = float(cfg.speed_factors[rng.integers(0, len(cfg.speed_factors))])
    n = w.size
    m = int(np.floor((n - 1) / factor)) + 1
    resampled = np.interp(np.arange(m) * factor, np.arange(n), w).astype(np.float32)
    if m >= n:
        return resampled[:n]
    out = np.zeros(n, dtype=np.float32)
    out[:m] = resampled
    return out


# Fixed application order; each op sees its own coin flip.
AUGMENT_OPS = (freq_drop, frame_drop, bit_reduce, sign_flip, speed_perturb)


def augment(w, rng, cfg=None):
    if cfg is None:
        cfg = AugmentConfig()
    out = np.asarray(w, dtype=np.float32)
    for op in AUGMENT_OPS:
        if rng.random() < cfg.prob:
            out = op(out, rng, cfg)
    return out
