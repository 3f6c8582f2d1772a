"""Dynamic mixing: on-the-fly training mixtures with recomposed labels.

For each class family (speech, noise, music) a quarter of the batch is
mixed with a random pool item at an SNR drawn uniformly from a dB range.
Families are independent, so one clip can end up multispeaker + noisy +
musical.  Labels are recomposed from the components: booleans OR,
speaker counts add, multispeaker = (total > 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import fit_length, rms
from .errors import DataError
from .labels import compose_labels

SILENCE_RMS = 1e-6

# Family order and per-index draw order are fixed so a seeded run is
# reproducible: for each family in FAMILY_ORDER draw the index subset,
# then per index (ascending) the pool kind (speech only), the pool item,
# the crop offset, and the SNR.
FAMILY_ORDER = ("speech", "noise", "music")
SPEECH_KINDS = ("english", "foreign", "synthetic")


def mix_gain(target, interferer, snr_db):
    """Gain g with target + g*interferer realizing ``snr_db``."""
    rt, ri = rms(target), rms(interferer)
    if rt <= SILENCE_RMS:
        raise DataError(f"silent mixing target (rms {rt:.2e})")
    if ri <= SILENCE_RMS:
        raise DataError(f"silent interferer (rms {ri:.2e})")
    return (rt / ri) * 10.0 ** (-snr_db / 20.0)


def mix_at_snr(target, interferer, snr_db, rng=None, return_components=False):
    """Mix ``interferer`` into ``target`` at the requested SNR.

    The interferer is tiled or randomly cropped to the target length.
    The sum is peak-normalized only when it clips, scaling the whole
    mixture so the realized SNR is untouched.
    """
    t = np.asarray(target, dtype=np.float32)
    i = fit_length(np.asarray(interferer, dtype=np.float32), t.size, rng)
    g = np.float32(mix_gain(t, i, snr_db))
    scaled = g * i
    out = t + scaled
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 1.0:
        out = out / np.float32(peak)
    if return_components:
        return out, t, scaled
    return out


@dataclass
class MixPools:
    """Interferer pools, each a list of (waveform-loader, labels) sources."""

    english: list = field(default_factory=list)
    foreign: list = field(default_factory=list)
    synthetic: list = field(default_factory=list)
    music: list = field(default_factory=list)
    noise: list = field(default_factory=list)

    def pool(self, kind):
        return getattr(self, kind)

    def require(self, kinds):
        for k in kinds:
            if not self.pool(k):
                raise DataError(f"mixing pool '{k}' is empty")


@dataclass
class MixItem:
    """One batch element passing through the mixer."""

    waveform: np.ndarray
    labels: object  # LabelVector
    speakers: int


def default_speech_probs(ratio=(2, 1, 1)):
    r = np.asarray(ratio, dtype=np.float64)
    if r.min() < 0 or r.sum() <= 0:
        raise DataError(f"bad speech pool ratio {ratio}")
    return r / r.sum()


def dynamic_mix(items, pools, rng, snr_range=(-5.0, 10.0), speech_probs=None,
                load=lambda src: src):
    """Mix a batch in place and return it.

    ``items`` is a list of MixItem; ``pools`` holds (source, labels,
    speakers) triples per kind; ``load`` maps a source to its waveform
    (identity when pools hold arrays, a WAV loader when they hold paths).
    """
    b = len(items)
    if b < 4:
        raise DataError(f"dynamic mixing needs batch size >= 4, got {b}")
    if speech_probs is None:
        speech_probs = default_speech_probs()
    quarter = b // 4
    lo, hi = snr_range
    pools.require(("music", "noise"))
    pools.require(tuple(k for k, p in zip(SPEECH_KINDS, speech_probs) if p > 0))

    for family in FAMILY_ORDER:
        picked = np.sort(rng.choice(b, size=quarter, replace=False))
        for idx in picked:
            if family == "speech":
                kind = SPEECH_KINDS[rng.choice(len(SPEECH_KINDS), p=speech_probs)]
            else:
                kind = family
            pool = pools.pool(kind)
            src, lab, speakers = pool[rng.integers(0, len(pool))]
            interferer = load(src)
            snr = float(rng.uniform(lo, hi))
            item = items[idx]
            item.waveform = mix_at_snr(item.waveform, interferer, snr, rng)
            composed = compose_labels(
                [(item.labels, item.speakers), (lab, speakers)]
            )
            item.labels = composed
            item.speakers = composed.num_speakers
    return items
