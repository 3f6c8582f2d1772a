"""WAV loading and the few waveform helpers the pipeline needs.

All audio enters the system as mono float32 in [-1, 1] at 16 kHz.
Files at any other rate are rejected rather than resampled: silent
resampling would desynchronize precomputed feature sidecars from their
source audio.
"""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .errors import AudioError

SAMPLE_RATE = 16000

_INT_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


def load_wav(path, expect_rate=SAMPLE_RATE):
    """Read a WAV file as mono float32 in [-1, 1].

    Integer PCM is scaled by its type range; float files are taken as-is.
    Stereo is downmixed by averaging; more than two channels is an error.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as e:
        raise AudioError(f"cannot read WAV file {path}: {e}") from e
    if rate != expect_rate:
        raise AudioError(f"{path}: sample rate {rate}, expected {expect_rate}")
    if data.ndim == 2:
        if data.shape[1] > 2:
            raise AudioError(f"{path}: {data.shape[1]} channels, expected mono or stereo")
        data = data.mean(axis=1)
    elif data.ndim != 1:
        raise AudioError(f"{path}: unsupported sample layout {data.shape}")
    scale = _INT_SCALE.get(data.dtype)
    if scale is not None:
        out = data.astype(np.float32) / np.float32(scale)
    elif data.dtype in (np.float32, np.float64):
        out = data.astype(np.float32)
    else:
        raise AudioError(f"{path}: unsupported sample dtype {data.dtype}")
    return np.ascontiguousarray(out)


def save_wav(path, waveform, rate=SAMPLE_RATE):
    """Write mono float32 samples as 16-bit PCM."""
    w = np.asarray(waveform, dtype=np.float32)
    pcm = np.clip(w, -1.0, 1.0)
    wavfile.write(path, rate, np.round(pcm * 32767.0).astype(np.int16))


def rms(waveform):
    w = np.asarray(waveform, dtype=np.float64)
    if w.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(w * w)))


def fit_length(waveform, n, rng=None):
    """Tile-and-crop ``waveform`` to exactly ``n`` samples.

    Shorter signals are tiled before cropping.  When an RNG is given the
    crop offset is uniform over the valid range, otherwise the head of
    the (tiled) signal is used.
    """
    w = np.asarray(waveform)
    if w.size == 0:
        raise AudioError("cannot fit an empty waveform")
    if w.size < n:
        reps = -(-n // w.size)
        w = np.tile(w, reps)
    slack = w.size - n
    off = 0 if slack == 0 or rng is None else int(rng.integers(0, slack + 1))
    return np.ascontiguousarray(w[off:off + n])
