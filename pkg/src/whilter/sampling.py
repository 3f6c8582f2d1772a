"""Class-weighted epoch sampling for imbalanced label sets.

Each class contributes weight (#negative / #positive); a sample's draw
weight is 1 plus the sum of the weights of its positive classes, so rare
positives surface more often without starving the classless majority.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DataError
from .labels import CLASS_NAMES


def compute_class_weights(entries):
    """Per-class weight w_c = neg_c / pos_c over the given entries.

    A class with no positives cannot be upsampled and a class with no
    negatives needs no upsampling; both get w_c = 0 with a warning.
    """
    if not entries:
        raise DataError("cannot compute class weights of an empty entry list")
    n = len(entries)
    weights = {}
    for c in CLASS_NAMES:
        pos = sum(1 for e in entries if getattr(e.labels, c))
        neg = n - pos
        if pos == 0:
            warnings.warn(f"class '{c}' has no positive examples; weight set to 0")
            weights[c] = 0.0
        elif neg == 0:
            warnings.warn(f"class '{c}' has no negative examples; weight set to 0")
            weights[c] = 0.0
        else:
            weights[c] = neg / pos
    return weights


def sample_weights(entries, class_weights):
    """Per-entry draw weight 1 + sum of positive-class weights."""
    w = np.ones(len(entries), dtype=np.float64)
    for i, e in enumerate(entries):
        for c in CLASS_NAMES:
            if getattr(e.labels, c):
                w[i] += class_weights[c]
    return w


def sample_epoch(entries, class_weights, rng, n=15000):
    """``n`` index draws with replacement, probability proportional to weight."""
    if not entries:
        raise DataError("cannot sample from an empty entry list")
    w = sample_weights(entries, class_weights)
    p = w / w.sum()
    return rng.choice(len(entries), size=n, replace=True, p=p)


def epoch_batches(entries, class_weights, rng, samples_per_epoch=15000, batch_size=64):
    """Index batches for one epoch: every batch full, none dropped.

    The draw count is rounded up to a whole number of batches so the
    defaults (15000, 64) give exactly 235 batches of 64.
    """
    n_batches = math.ceil(samples_per_epoch / batch_size)
    idx = sample_epoch(entries, class_weights, rng, n=n_batches * batch_size)
    return idx.reshape(n_batches, batch_size)
