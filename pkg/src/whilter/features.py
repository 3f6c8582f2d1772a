"""Per-layer encoder feature stacks: binary container, backends, padding.

A feature stack is a float32 array of shape [layers, frames, dim] holding
one frozen-encoder output per layer.  Stacks are produced either by an
external tool that writes sidecar files (``<audio>.whlf``) or by the
in-process deterministic mock encoder used for tests and toy runs.

File layout (version 1, all integers little-endian):

    magic    4 bytes  "WHLF"
    version  u32      1
    layers   u32
    frames   u32
    dim      u32
    dtype    u32      0 = float32 little-endian (other codes reserved)
    payload  layers*frames*dim float32 values, C order [layer][frame][dim]
"""

from __future__ import annotations

import struct

import numpy as np

from .audio import AudioError
from .errors import (
    BadMagicError,
    DtypeCodeError,
    FeatureFileError,
    NonFiniteError,
    PayloadSizeError,
    UnsupportedVersionError,
)

MAGIC = b"WHLF"
VERSION = 1
DTYPE_F32 = 0
HOP = 320
FFT_SIZE = 512
N_BANDS = 8

_HEADER = struct.Struct("<4s5I")


def pad_or_truncate(waveform, n_samples):
    """Force a waveform to exactly ``n_samples``: zero-pad tail or cut head.

    Idempotent; the default model consumes 30 s at 16 kHz = 480000 samples.
    """
    w = np.asarray(waveform, dtype=np.float32)
    if w.size == 0:
        raise AudioError("empty waveform")
    if w.size >= n_samples:
        return np.ascontiguousarray(w[:n_samples])
    out = np.zeros(n_samples, dtype=np.float32)
    out[: w.size] = w
    return out


def write_features(stack, path):
    stack = np.asarray(stack, dtype=np.float32)
    if stack.ndim != 3:
        raise FeatureFileError(f"feature stack must be 3-D, got shape {stack.shape}")
    layers, frames, dim = stack.shape
    header = _HEADER.pack(MAGIC, VERSION, layers, frames, dim, DTYPE_F32)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(stack, dtype="<f4").tobytes())


def read_features(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < _HEADER.size:
        raise PayloadSizeError(f"{path}: truncated header ({len(raw)} bytes)")
    _, version, layers, frames, dim, dtype_code = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if dtype_code != DTYPE_F32:
        raise DtypeCodeError(f"{path}: dtype code {dtype_code} not supported (0 = float32)")
    expected = layers * frames * dim * 4
    got = len(raw) - _HEADER.size
    if got < expected:
        raise PayloadSizeError(f"{path}: truncated payload ({got} of {expected} bytes)")
    if got > expected:
        raise PayloadSizeError(f"{path}: oversized payload ({got} of {expected} bytes)")
    stack = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(layers, frames, dim)
    if not np.all(np.isfinite(stack)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    return np.ascontiguousarray(stack)


def sidecar_path(audio_path):
    return str(audio_path) + ".whlf"


class MockEncoder:
    """Deterministic frozen-encoder stand-in.

    Frames the waveform with hop 320 and 512-sample windows, computes 8
    rectangular band energies of the magnitude spectrum, applies
    log(1 + e), projects the 8 bands to ``dim`` with a fixed seeded random
    matrix, then emits ``layers`` views tanh(scale_l * P + shift_l) with
    per-layer fixed affine coefficients.  Pure function of
    (waveform, seed): same inputs give bit-identical stacks.
    """

    def __init__(self, layers=12, frames=1500, dim=768, seed=1234):
        self.layers = layers
        self.frames = frames
        self.dim = dim
        self.seed = seed
        self.n_samples = frames * HOP
        rng = np.random.default_rng(seed)
        self.projection = (rng.standard_normal((N_BANDS, dim)) / np.sqrt(N_BANDS)).astype(np.float32)
        self.scales = rng.uniform(0.5, 1.5, size=(layers, dim)).astype(np.float32)
        self.shifts = rng.uniform(-0.5, 0.5, size=(layers, dim)).astype(np.float32)
        # Bands partition FFT bins 1..256 into 8 contiguous blocks of 32;
        # bin 0 (DC) and bin 256 (Nyquist) are dropped.
        edges = 1 + 32 * np.arange(N_BANDS + 1)
        self.band_edges = edges

    def band_energies(self, waveform):
        """[frames, 8] log1p band energies of the framed magnitude spectrum."""
        w = np.asarray(waveform, dtype=np.float32)
        if w.size != self.n_samples:
            raise AudioError(f"encoder expects {self.n_samples} samples, got {w.size}")
        padded = np.concatenate([w, np.zeros(FFT_SIZE - HOP, dtype=np.float32)])
        windows = np.lib.stride_tricks.sliding_window_view(padded, FFT_SIZE)[::HOP][: self.frames]
        spec = np.abs(np.fft.rfft(windows, axis=-1)) ** 2
        bands = np.add.reduceat(spec[:, 1:257], self.band_edges[:-1] - 1, axis=-1)
        return np.log1p(bands).astype(np.float32)

    def encode(self, waveform):
        """[layers, frames, dim] float32 stack for one waveform."""
        proj = self.band_energies(waveform) @ self.projection  # [frames, dim]
        stack = np.tanh(self.scales[:, None, :] * proj[None, :, :] + self.shifts[:, None, :])
        return np.ascontiguousarray(stack, dtype=np.float32)


class MockBackend:
    """Computes feature stacks in-process from the waveform."""

    name = "mock"

    def __init__(self, encoder):
        self.encoder = encoder
        self.layers = encoder.layers
        self.frames = encoder.frames
        self.dim = encoder.dim
        self.n_samples = encoder.n_samples

    def extract(self, waveform, source_path=None):
        return self.encoder.encode(pad_or_truncate(waveform, self.n_samples))


class FileBackend:
    """Reads precomputed sidecar files written by an external encoder."""

    name = "file"

    def __init__(self, layers=12, frames=1500, dim=768):
        self.layers = layers
        self.frames = frames
        self.dim = dim
        self.n_samples = frames * HOP

    def extract(self, waveform, source_path=None):
        if source_path is None:
            raise FeatureFileError("file backend needs a source path to locate the sidecar")
        side = sidecar_path(source_path)
        try:
            stack = read_features(side)
        except FileNotFoundError:
            raise FeatureFileError(f"missing sidecar feature file {side}") from None
        if stack.shape != (self.layers, self.frames, self.dim):
            raise FeatureFileError(
                f"{side}: header says {stack.shape}, model expects "
                f"({self.layers}, {self.frames}, {self.dim})"
            )
        return stack
