"""Synthetic corpus generator for end-to-end tests.

Each class plants a signature in a distinct frequency region so the
band-energy front end can in principle separate them, while leaving the
actual decision boundary to the trained model:

  speech voices    fundamental + harmonics below 800 Hz, plus one formant
                   tone near 1.5 kHz or 2.5 kHz, gated by an utterance
                   envelope with real pauses
  multispeaker     a second voice whose utterances fill the first voice's
                   pauses (few quiet frames, two formant regions)
  foreign          the formant sits near 3.5 kHz instead
  music            a sustained two-tone chord near 4.5 kHz
  noise            band-limited noise around 6.5 kHz
  synthetic        a constant amplitude-modulated buzz near 7.5 kHz

Generated clips are 2 s (32000 samples at 16 kHz, 100 feature frames).
"""

from __future__ import annotations

import numpy as np

from whilter.audio import save_wav
from whilter.labels import LabelVector
from whilter.manifest import ManifestEntry, write_manifest

SR = 16000
N_SAMPLES = 32000
FRAMES = 100

FORMANT_CENTERS = {"low": 1500.0, "high": 2500.0, "foreign": 3500.0}


def _tone(freq, n, phase=0.0):
    return np.sin(2.0 * np.pi * freq * np.arange(n) / SR + phase)


def _ramp_edges(mask, ramp=160):
    """Soft 10 ms on/off ramps on a 0/1 activity mask."""
    kernel = np.ones(ramp) / ramp
    return np.convolve(mask.astype(np.float64), kernel, mode="same")


def _burst_mask(rng, n, duty=(0.25, 0.6), gap=(0.15, 0.45)):
    """Utterance activity mask: alternating bursts and true pauses."""
    mask = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.2) * SR)
    while pos < n:
        burst = int(rng.uniform(*duty) * SR)
        mask[pos:pos + burst] = 1.0
        pos += burst + int(rng.uniform(*gap) * SR)
    if mask.sum() < 0.2 * n:  # guarantee audible content
        mask[: n // 3] = 1.0
    return mask


def _voice(rng, n, formant="low", mask=None, dense=False):
    f0 = rng.uniform(120.0, 250.0)
    w = np.zeros(n)
    for k, a in ((1, 1.0), (2, 0.5), (3, 0.25)):
        w += a * _tone(k * f0, n, rng.uniform(0, 2 * np.pi))
    centre = FORMANT_CENTERS[formant]
    w += 0.8 * _tone(rng.uniform(centre - 300, centre + 300), n,
                     rng.uniform(0, 2 * np.pi))
    if mask is None:
        if dense:
            # interferer voices talk almost continuously, so overlapped
            # speech keeps nearly no mutual pauses
            mask = _burst_mask(rng, n, duty=(0.5, 0.9), gap=(0.05, 0.15))
        else:
            mask = _burst_mask(rng, n)
    env = _ramp_edges(mask)
    w = w * env
    peak = np.abs(w).max()
    return (0.3 * w / peak if peak > 0 else w), mask


def _second_voice(rng, n, first_mask, formant):
    """A conversation partner: talks in the first voice's pauses."""
    mask = (first_mask == 0).astype(np.float64)
    # let turns overlap a little so activity never looks gated
    shift = int(rng.uniform(0.02, 0.08) * SR)
    mask = np.maximum(mask, np.roll(mask, shift))
    w, _ = _voice(rng, n, formant=formant, mask=mask)
    return w


def _music(rng, n):
    base = rng.uniform(4200.0, 4600.0)
    w = _tone(base, n) + 0.7 * _tone(base + rng.uniform(150, 300), n)
    am = 0.85 + 0.15 * np.sin(2 * np.pi * 0.5 * np.arange(n) / SR)
    return 0.22 * w / np.abs(w).max() * am


def _band_noise(rng, n, lo=6100.0, hi=6900.0):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, d=1.0 / SR)
    spec[(f < lo) | (f > hi)] = 0.0
    w = np.fft.irfft(spec, n=n)
    return 0.1 * w / np.sqrt(np.mean(w ** 2))


def _buzz(rng, n):
    carrier = _tone(rng.uniform(7300.0, 7700.0), n)
    am = 0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 50.0 * np.arange(n) / SR))
    return 0.15 * carrier * am


def _labels(num_speakers=1, **flags):
    base = dict(multispeaker=num_speakers > 1, music=False, foreign=False,
                noise=False, synthetic=False)
    base.update(flags)
    return LabelVector(num_speakers=num_speakers, **base)


def _speech_band(rng):
    return "low" if rng.random() < 0.5 else "high"


def make_clip(rng, archetype, n=N_SAMPLES):
    """(waveform float32, LabelVector) for one archetype."""
    if archetype == "classless":
        w, _ = _voice(rng, n, _speech_band(rng))
        return w.astype(np.float32), _labels(1)
    if archetype == "multispeaker":
        w1, mask = _voice(rng, n, "low")
        w2 = _second_voice(rng, n, mask, "high")
        return (w1 + w2).astype(np.float32), _labels(2)
    if archetype == "music":
        w, _ = _voice(rng, n, _speech_band(rng))
        return (w + _music(rng, n)).astype(np.float32), _labels(1, music=True)
    if archetype == "foreign":
        w, _ = _voice(rng, n, "foreign")
        return w.astype(np.float32), _labels(1, foreign=True)
    if archetype == "noise":
        w, _ = _voice(rng, n, _speech_band(rng))
        return (w + _band_noise(rng, n)).astype(np.float32), _labels(1, noise=True)
    if archetype == "synthetic":
        w, _ = _voice(rng, n, _speech_band(rng))
        return (w + _buzz(rng, n)).astype(np.float32), _labels(1, synthetic=True)
    if archetype == "foreign_multi":
        w1, mask = _voice(rng, n, "foreign")
        w2 = _second_voice(rng, n, mask, _speech_band(rng))
        return (w1 + w2).astype(np.float32), _labels(2, foreign=True)
    if archetype == "music_noise":
        w, _ = _voice(rng, n, _speech_band(rng))
        out = w + _music(rng, n) + _band_noise(rng, n)
        return out.astype(np.float32), _labels(1, music=True, noise=True)
    raise ValueError(f"unknown archetype {archetype!r}")


def make_pool_clip(rng, kind, n=N_SAMPLES):
    """(waveform float32, LabelVector, speaker count) for interferer pools."""
    if kind == "english":
        w, _ = _voice(rng, n, _speech_band(rng), dense=True)
        return w.astype(np.float32), _labels(1), 1
    if kind == "foreign":
        w, _ = _voice(rng, n, "foreign", dense=True)
        return w.astype(np.float32), _labels(1, foreign=True), 1
    if kind == "synthetic":
        w, _ = _voice(rng, n, _speech_band(rng), dense=True)
        return (w + _buzz(rng, n)).astype(np.float32), _labels(1, synthetic=True), 1
    if kind == "music":
        return _music(rng, n).astype(np.float32), _labels(0, music=True), 0
    if kind == "noise":
        return _band_noise(rng, n).astype(np.float32), _labels(0, noise=True), 0
    raise ValueError(f"unknown pool kind {kind!r}")


TRAIN_ARCHETYPES = (
    ("classless", 0.40), ("multispeaker", 0.12), ("music", 0.12),
    ("foreign", 0.12), ("noise", 0.12), ("synthetic", 0.12),
)
TEST_ARCHETYPES = (
    "classless", "multispeaker", "music", "foreign",
    "noise", "synthetic", "foreign_multi", "music_noise",
)
POOL_KINDS = ("english", "foreign", "synthetic", "music", "noise")


def build_corpus(root, seed=0, n_train=2000, n_test=400, pool_size=64):
    """Write wavs + manifests under ``root``; return a path map."""
    rng = np.random.default_rng(seed)
    audio = root / "audio"
    audio.mkdir(parents=True, exist_ok=True)

    names = [a for a, _ in TRAIN_ARCHETYPES]
    probs = np.array([p for _, p in TRAIN_ARCHETYPES])
    train = []
    for i in range(n_train):
        arch = names[rng.choice(len(names), p=probs)]
        w, labels = make_clip(rng, arch)
        path = f"train_{i:05d}.wav"
        save_wav(audio / path, w)
        train.append(ManifestEntry(path, labels, split="train"))

    test = []
    for i in range(n_test):
        arch = TEST_ARCHETYPES[i % len(TEST_ARCHETYPES)]
        w, labels = make_clip(rng, arch)
        path = f"test_{i:05d}.wav"
        save_wav(audio / path, w)
        test.append(ManifestEntry(path, labels, split="test"))

    paths = {"audio_root": audio}
    write_manifest(train, root / "train.jsonl")
    write_manifest(test, root / "test.jsonl")
    paths["train_manifest"] = root / "train.jsonl"
    paths["test_manifest"] = root / "test.jsonl"

    for kind in POOL_KINDS:
        entries = []
        for i in range(pool_size):
            w, labels, _ = make_pool_clip(rng, kind)
            path = f"pool_{kind}_{i:04d}.wav"
            save_wav(audio / path, w)
            entries.append(ManifestEntry(path, labels, split="train"))
        write_manifest(entries, root / f"pool_{kind}.jsonl")
        paths[f"pool_{kind}"] = root / f"pool_{kind}.jsonl"
    return paths
