"""Label vectors for the five filtering classes.

Class order is fixed everywhere (model outputs, reports, thresholds):
multispeaker, music, foreign, noise, synthetic.  A clip with all five
labels false is a "classless" sample: clean single-speaker English
speech, the material a TTS corpus wants to keep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ManifestError

CLASS_NAMES = ("multispeaker", "music", "foreign", "noise", "synthetic")
N_CLASSES = len(CLASS_NAMES)


@dataclass
class LabelVector:
    multispeaker: bool
    music: bool
    foreign: bool
    noise: bool
    synthetic: bool
    num_speakers: int | None = None

    def __post_init__(self):
        for name in CLASS_NAMES:
            setattr(self, name, bool(getattr(self, name)))
        if self.num_speakers is not None:
            self.num_speakers = int(self.num_speakers)
            if self.num_speakers < 0:
                raise ManifestError(f"num_speakers must be >= 0, got {self.num_speakers}")
            if self.multispeaker != (self.num_speakers > 1):
                raise ManifestError(
                    f"num_speakers={self.num_speakers} inconsistent with "
                    f"multispeaker={self.multispeaker}"
                )

    def as_array(self, dtype=np.float32):
        return np.array([getattr(self, c) for c in CLASS_NAMES], dtype=dtype)

    def as_dict(self):
        d = {c: getattr(self, c) for c in CLASS_NAMES}
        if self.num_speakers is not None:
            d["num_speakers"] = self.num_speakers
        return d

    @classmethod
    def from_dict(cls, d, where=""):
        missing = [c for c in CLASS_NAMES if c not in d]
        if missing:
            raise ManifestError(f"{where}missing label '{missing[0]}'")
        try:
            return cls(
                **{c: d[c] for c in CLASS_NAMES},
                num_speakers=d.get("num_speakers"),
            )
        except ManifestError as e:
            raise ManifestError(f"{where}{e}") from None

    @classmethod
    def classless(cls, num_speakers=None):
        return cls(False, False, False, False, False, num_speakers=num_speakers)

    def speaker_count(self, assume_speech=True):
        """Best-available speaker count for mixing composition.

        When unannotated: a multispeaker clip counts as 2 (the minimum
        consistent with the flag); otherwise 1 for speech-bearing material
        and 0 for pure interference (music/noise pool items).
        """
        if self.num_speakers is not None:
            return self.num_speakers
        if self.multispeaker:
            return 2
        return 1 if assume_speech else 0


def compose_labels(parts_with_counts):
    """Label vector of a mixture from its components.

    Booleans are element-wise OR; speaker counts add; the multispeaker
    flag is recomputed as (total speakers > 1).
    """
    total = 0
    flags = {c: False for c in CLASS_NAMES}
    for lab, count in parts_with_counts:
        total += count
        for c in CLASS_NAMES:
            flags[c] = flags[c] or getattr(lab, c)
    flags["multispeaker"] = total > 1
    return LabelVector(num_speakers=total, **flags)
