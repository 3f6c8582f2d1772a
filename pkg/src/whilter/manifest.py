"""Dataset manifests: JSON Lines parsing/writing and annotation ingest.

Manifest schema, one JSON object per line (UTF-8):

    {"audio_path": "clips/a.wav",
     "labels": {"multispeaker": false, "music": true, "foreign": false,
                "noise": false, "synthetic": false, "num_speakers": 1},
     "split": "train", "source": "podcasts", "duration_s": 12.4}

``num_speakers`` is optional; when present it must agree with the
multispeaker flag.  Errors carry 1-based line numbers.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

from .errors import ManifestError
from .labels import CLASS_NAMES, LabelVector

SPLITS = ("train", "val", "test")


@dataclass
class ManifestEntry:
    audio_path: str
    labels: LabelVector
    split: str = "train"
    source: str = ""
    duration_s: float | None = None

    def as_dict(self):
        d = {
            "audio_path": self.audio_path,
            "labels": self.labels.as_dict(),
            "split": self.split,
            "source": self.source,
        }
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        return d


def entry_from_dict(obj, where=""):
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}expected a JSON object")
    path = obj.get("audio_path")
    if not isinstance(path, str) or not path:
        raise ManifestError(f"{where}missing or empty 'audio_path'")
    labels = obj.get("labels")
    if not isinstance(labels, dict):
        raise ManifestError(f"{where}missing 'labels' object")
    lv = LabelVector.from_dict(labels, where=where)
    split = obj.get("split", "train")
    if split not in SPLITS:
        raise ManifestError(f"{where}bad split {split!r}, expected one of {SPLITS}")
    dur = obj.get("duration_s")
    return ManifestEntry(
        audio_path=path,
        labels=lv,
        split=split,
        source=obj.get("source", ""),
        duration_s=float(dur) if dur is not None else None,
    )


def parse_manifest(path):
    entries = []
    seen = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}: line {lineno}: "
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{where}invalid JSON ({e.msg})") from None
            entry = entry_from_dict(obj, where=where)
            if entry.audio_path in seen:
                raise ManifestError(
                    f"{where}duplicate audio_path {entry.audio_path!r} "
                    f"(first seen on line {seen[entry.audio_path]})"
                )
            seen[entry.audio_path] = lineno
            entries.append(entry)
    return entries


def write_manifest(entries, path):
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(json.dumps(e.as_dict(), sort_keys=True) + "\n")


def split_entries(entries, split):
    return [e for e in entries if e.split == split]


def label_counts(entries):
    """Per-class positive counts plus a classless tally."""
    counts = {c: 0 for c in CLASS_NAMES}
    classless = 0
    for e in entries:
        arr = e.labels.as_array(bool)
        if not arr.any():
            classless += 1
        for c in CLASS_NAMES:
            counts[c] += int(getattr(e.labels, c))
    counts["classless"] = classless
    counts["total"] = len(entries)
    return counts


# -- annotation-export ingest ------------------------------------------------

_BOOL_FIELDS = ("music", "foreign", "noise", "synthetic")


def _result_value(item):
    """Scalar value of one annotation result item, format-tolerant."""
    value = item.get("value", {})
    if "number" in value:
        return value["number"]
    if "boolean" in value:
        return value["boolean"]
    if "choices" in value:
        return value["choices"]
    if "text" in value:
        return value["text"]
    return None


def _truthy(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return v != 0
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "y")
    if isinstance(v, list):
        return any(_truthy(x) for x in v)
    return False


def ingest_labelstudio(export_path):
    """Entries from an annotation-tool JSON export.

    Expected shape: a JSON array of tasks; each task carries the audio
    reference under ``data.audio`` (or ``data.audio_path``) and one
    annotation whose ``result`` list holds a ``num_speakers`` count plus
    the four boolean class fields keyed by ``from_name``.  Tasks without
    a usable speaker count are skipped with a warning; the multispeaker
    label is always derived as (count > 1), never read from the export.
    """
    with open(export_path, encoding="utf-8") as f:
        try:
            tasks = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(
                f"{export_path}: invalid JSON at offset {e.pos} ({e.msg})"
            ) from None
    if not isinstance(tasks, list):
        raise ManifestError(f"{export_path}: expected a top-level JSON array of tasks")

    entries = []
    skipped = 0
    for i, task in enumerate(tasks):
        data = task.get("data", {}) if isinstance(task, dict) else {}
        audio = data.get("audio") or data.get("audio_path")
        if not audio:
            warnings.warn(f"{export_path}: task {i}: no audio reference, skipped")
            skipped += 1
            continue
        results = []
        for ann in task.get("annotations", []) or []:
            results.extend(ann.get("result", []) or [])
        fields = {}
        for item in results:
            name = item.get("from_name")
            if name:
                fields[name] = _result_value(item)

        count = fields.get("num_speakers")
        if isinstance(count, list) and count:
            count = count[0]
        try:
            count = int(count)
        except (TypeError, ValueError):
            warnings.warn(f"{export_path}: task {i} ({audio}): missing speaker count, skipped")
            skipped += 1
            continue

        flags = {name: _truthy(fields.get(name)) for name in _BOOL_FIELDS}
        labels = LabelVector(
            multispeaker=count > 1,
            num_speakers=count,
            **flags,
        )
        entries.append(
            ManifestEntry(
                audio_path=str(audio),
                labels=labels,
                split="train",
                source="labelstudio",
                duration_s=data.get("duration_s"),
            )
        )
    if skipped:
        warnings.warn(f"{export_path}: skipped {skipped} of {len(tasks)} tasks")
    return entries


def seeded_split(entries, ratios, seed):
    """Deterministic random split into train/val/test by ratio.

    ``ratios`` is a (train, val, test) triple summing to 1.  Sizes are
    rounded; the test split absorbs the remainder.
    """
    import numpy as np

    from .errors import ConfigError

    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x < 0 for x in r) or abs(sum(r) - 1.0) > 1e-6:
        raise ConfigError(f"split ratios must be 3 non-negative numbers summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(entries))
    n = len(entries)
    n_train = int(round(n * r[0]))
    n_val = int(round(n * r[1]))
    n_val = min(n_val, n - n_train)
    out = []
    for pos, idx in enumerate(order):
        e = entries[idx]
        split = "train" if pos < n_train else ("val" if pos < n_train + n_val else "test")
        out.append(
            ManifestEntry(e.audio_path, e.labels, split=split, source=e.source, duration_s=e.duration_s)
        )
    return out
