"""Classification metrics and per-class report rendering.

Scores are probabilities in [0, 1]; a prediction is positive iff
score >= threshold (ties count as positive, which moves boundary
samples into TP/FP).  EER sweeps every distinct score as a threshold,
groups ties into one operating point, and linearly interpolates between
the two points where FPR - FNR changes sign.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .labels import CLASS_NAMES


def confusion_counts(scores, labels, threshold):
    """(TP, FP, TN, FN) at the given threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError(f"scores/labels shape mismatch: {s.shape} vs {y.shape}")
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    return tp, fp, tn, fn


def precision_recall_f1(counts):
    tp, fp, _, fn = counts
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def roc_points(scores, labels):
    """Operating points (threshold, FPR, FNR) in ascending threshold order.

    One point per distinct score, plus a virtual final point one unit
    above the maximum where nothing is predicted positive (FPR 0, FNR 1).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError(
            f"EER needs at least one positive and one negative (got {n_pos} pos, {n_neg} neg)"
        )
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    distinct = np.flatnonzero(np.diff(s_sorted)) if s_sorted.size > 1 else np.array([], dtype=int)
    # Index of the last occurrence of each distinct score (descending order).
    last = np.concatenate([distinct, [s_sorted.size - 1]])
    tp_cum = np.cumsum(y_sorted)
    fp_cum = np.cumsum(~y_sorted)
    thr_desc = s_sorted[last]
    fpr_desc = fp_cum[last] / n_neg
    fnr_desc = 1.0 - tp_cum[last] / n_pos
    thr = np.concatenate([thr_desc[::-1], [thr_desc[0] + 1.0]])
    fpr = np.concatenate([fpr_desc[::-1], [0.0]])
    fnr = np.concatenate([fnr_desc[::-1], [1.0]])
    return thr, fpr, fnr


def eer(scores, labels):
    """(eer_value, threshold) where FPR meets FNR, linearly interpolated."""
    thr, fpr, fnr = roc_points(scores, labels)
    d = fpr - fnr  # monotone non-increasing, from +1 down to -1
    j = int(np.argmax(d <= 0.0))
    if d[j] == 0.0:
        return float(fpr[j]), float(thr[j])
    lam = d[j - 1] / (d[j - 1] - d[j])
    value = fpr[j - 1] + lam * (fpr[j] - fpr[j - 1])
    threshold = thr[j - 1] + lam * (thr[j] - thr[j - 1])
    return float(value), float(threshold)


@dataclass
class ClassReport:
    class_name: str
    threshold: float
    n_pos: int
    n_neg: int
    fpr: float
    fnr: float
    precision: float
    recall: float
    f1: float
    eer: float | None = None
    eer_threshold: float | None = None
    mean_proc_time_s: float | None = None
    note: str = ""

    def as_dict(self):
        return {
            "class": self.class_name,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "eer": self.eer,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "t_proc_s": self.mean_proc_time_s,
            "threshold": self.threshold,
            "eer_threshold": self.eer_threshold,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "note": self.note,
        }


def score_set_report(class_name, scores, labels, threshold, mean_proc_time_s=None):
    counts = confusion_counts(scores, labels, threshold)
    tp, fp, tn, fn = counts
    n_pos, n_neg = tp + fn, fp + tn
    p, r, f1 = precision_recall_f1(counts)
    fpr = fp / n_neg if n_neg > 0 else 0.0
    fnr = fn / n_pos if n_pos > 0 else 0.0
    rep = ClassReport(
        class_name=class_name, threshold=threshold, n_pos=n_pos, n_neg=n_neg,
        fpr=fpr, fnr=fnr, precision=p, recall=r, f1=f1,
        mean_proc_time_s=mean_proc_time_s,
    )
    try:
        rep.eer, rep.eer_threshold = eer(scores, labels)
    except DataError:
        rep.note = "EER omitted: single-class score set"
    return rep


def evaluate(model, entries, backend, thresholds=None, timing="wall",
             load_waveform=None, progress=None):
    """Per-class reports over manifest entries.

    Feature extraction runs outside the clock; only the model forward is
    timed (per sample, wall clock).  ``timing="off"`` skips measurement
    entirely so report files are bit-reproducible.
    """
    if not entries:
        raise DataError("cannot evaluate an empty entry list")
    if thresholds is None:
        thresholds = {c: 0.5 for c in CLASS_NAMES}
    scores = np.empty((len(entries), len(CLASS_NAMES)), dtype=np.float64)
    labels = np.empty((len(entries), len(CLASS_NAMES)), dtype=bool)
    times = []
    for i, entry in enumerate(entries):
        wave = load_waveform(entry) if load_waveform is not None else None
        stack = backend.extract(wave, entry.audio_path)
        if timing == "wall":
            t0 = time.perf_counter()
            probs = model.predict(stack[None])[0]
            times.append(time.perf_counter() - t0)
        else:
            probs = model.predict(stack[None])[0]
        scores[i] = probs
        labels[i] = entry.labels.as_array(bool)
        if progress is not None:
            progress(i + 1, len(entries))
    mean_t = float(np.mean(times)) if times else None
    return [
        score_set_report(c, scores[:, k], labels[:, k], thresholds[c], mean_t)
        for k, c in enumerate(CLASS_NAMES)
    ]


# -- rendering ---------------------------------------------------------------

CSV_COLUMNS = (
    "class", "fpr_pct", "fnr_pct", "eer_pct", "precision_pct", "recall_pct",
    "f1_pct", "t_proc_s", "threshold", "eer_threshold", "n_pos", "n_neg",
)

MISSING = "—"  # em dash placeholder for absent metrics


def _pct(x):
    return None if x is None else 100.0 * x


def _sig3(x):
    return float(f"{x:.3g}")


def render_text(reports):
    headers = ("class", "FPR%", "FNR%", "EER%", "Prec%", "Rec%", "F1%", "T_proc")
    rows = [headers]
    for rep in reports:
        cells = [rep.class_name]
        for v in (rep.fpr, rep.fnr, rep.eer, rep.precision, rep.recall, rep.f1):
            cells.append(MISSING if v is None else f"{100.0 * v:.1f}")
        cells.append(MISSING if rep.mean_proc_time_s is None else f"{_sig3(rep.mean_proc_time_s)}s")
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        row = [
            rep.class_name,
            _pct(rep.fpr), _pct(rep.fnr), _pct(rep.eer),
            _pct(rep.precision), _pct(rep.recall), _pct(rep.f1),
            rep.mean_proc_time_s, rep.threshold, rep.eer_threshold,
            rep.n_pos, rep.n_neg,
        ]
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def parse_csv(text):
    """Reports parsed back from render_csv output (inverse pair)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise DataError("unrecognized report CSV header")
    out = []
    for row in rows[1:]:
        vals = dict(zip(CSV_COLUMNS, row))

        def num(key, cast=float):
            v = vals[key]
            return None if v == "" else cast(v)

        out.append(
            ClassReport(
                class_name=vals["class"],
                threshold=num("threshold"),
                n_pos=num("n_pos", int), n_neg=num("n_neg", int),
                fpr=num("fpr_pct") / 100.0, fnr=num("fnr_pct") / 100.0,
                precision=num("precision_pct") / 100.0,
                recall=num("recall_pct") / 100.0, f1=num("f1_pct") / 100.0,
                eer=None if vals["eer_pct"] == "" else float(vals["eer_pct"]) / 100.0,
                eer_threshold=num("eer_threshold"),
                mean_proc_time_s=num("t_proc_s"),
            )
        )
    return out


def render_jsonl(reports):
    return "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n" for r in reports)


def render_report(reports, fmt):
    if fmt == "text":
        return render_text(reports)
    if fmt == "csv":
        return render_csv(reports)
    if fmt == "jsonl":
        return render_jsonl(reports)
    raise DataError(f"unknown report format {fmt!r}")
