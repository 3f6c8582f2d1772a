"""Command-line interface.

Subcommands: train (stage 1, dynamic mixing), finetune (stage 2,
augmentations), eval (metric reports), filter (manifest partitioning),
ingest (annotation export -> split manifests).

Exit codes: 0 success, 1 data error (bad files, empty splits, non-finite
training), 2 configuration error (bad flags/config values).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import FIELD_SECTIONS, load_run_config, parse_thresholds
from .errors import ConfigError, DataError, WhilterError
from .features import FileBackend, MockBackend, MockEncoder
from .labels import CLASS_NAMES
from .manifest import (
    ingest_labelstudio,
    label_counts,
    parse_manifest,
    seeded_split,
    split_entries,
    write_manifest,
)
from .metrics import evaluate, render_report
from .model import load_checkpoint
from .training import Trainer

ENHANCE_CLASSES = frozenset({"multispeaker", "music", "noise"})


def _add_run_flags(sub):
    sub.add_argument("--config", help="INI config file; flags override it")
    sub.add_argument("--resume", metavar="CKPT", help="checkpoint dir to resume from")
    for key in FIELD_SECTIONS:
        if key == "stage":
            continue
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="V")


def _run_overrides(args):
    return {k: getattr(args, k) for k in FIELD_SECTIONS if getattr(args, k, None) is not None}


def _load_model(checkpoint):
    model, _, _, _ = load_checkpoint(checkpoint)
    return model


def _make_backend(model, name, mock_seed):
    c = model.config
    if name == "mock":
        enc = MockEncoder(layers=c.encoder_layers, frames=c.frames, dim=c.enc_dim, seed=mock_seed)
        return MockBackend(enc)
    if name == "file":
        return FileBackend(layers=c.encoder_layers, frames=c.frames, dim=c.enc_dim)
    raise ConfigError(f"unknown feature backend {name!r}")


def _entry_loader(backend, audio_root):
    if backend.name != "mock":
        return None
    from .audio import load_wav

    def load(entry):
        path = os.path.join(audio_root, entry.audio_path) if audio_root else entry.audio_path
        return load_wav(path)

    return load


def _pick_split(entries, split, where):
    picked = entries if split == "all" else split_entries(entries, split)
    if not picked:
        raise DataError(f"{where}: split '{split}' is empty")
    return picked


# -- subcommands ---------------------------------------------------------------

def cmd_train(args):
    cfg = load_run_config(args.config, _run_overrides(args), forced_stage="simulated")
    summary = Trainer(cfg).run(resume_from=args.resume)
    print(json.dumps(summary))
    return 0


def cmd_finetune(args):
    cfg = load_run_config(args.config, _run_overrides(args), forced_stage="finetune")
    if not args.init_from and not args.resume:
        raise ConfigError("finetune needs --init-from (stage-1 checkpoint) or --resume")
    summary = Trainer(cfg).run(resume_from=args.resume, init_from=args.init_from)
    print(json.dumps(summary))
    return 0


def cmd_eval(args):
    model = _load_model(args.checkpoint)
    backend = _make_backend(model, args.backend, args.mock_seed)
    entries = _pick_split(parse_manifest(args.manifest), args.split, args.manifest)
    reports = evaluate(
        model, entries, backend,
        thresholds=parse_thresholds(args.thresholds),
        timing=args.timing,
        load_waveform=_entry_loader(backend, args.audio_root),
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for fmt, name in (("text", "report.txt"), ("csv", "report.csv"), ("jsonl", "report.jsonl")):
        with open(os.path.join(args.out_dir, name), "w", encoding="utf-8") as f:
            f.write(render_report(reports, fmt))
    sys.stdout.write(render_report(reports, "text"))
    return 0


def _filter_tier(flagged, policy):
    if not flagged:
        return "keep"
    if policy == "two-tier":
        return "enhance" if all(c in ENHANCE_CLASSES for c in flagged) else "discard"
    return "reject"


def cmd_filter(args):
    model = _load_model(args.checkpoint)
    backend = _make_backend(model, args.backend, args.mock_seed)
    entries = _pick_split(parse_manifest(args.manifest), args.split, args.manifest)
    thresholds = parse_thresholds(args.thresholds)
    disabled = set(args.disable or [])
    for c in disabled:
        if c not in CLASS_NAMES:
            raise ConfigError(f"--disable {c!r}: unknown class")
    enabled = [c for c in CLASS_NAMES if c not in disabled]
    loader = _entry_loader(backend, args.audio_root)

    tiers = {"keep": [], "enhance": [], "discard": [], "reject": []}
    decisions = []
    for start in range(0, len(entries), args.batch_size):
        chunk = entries[start:start + args.batch_size]
        stacks = np.stack([
            backend.extract(loader(e) if loader else None, e.audio_path) for e in chunk
        ])
        probs = model.predict(stacks)
        for e, p in zip(chunk, probs):
            by_class = dict(zip(CLASS_NAMES, (float(x) for x in p)))
            flagged = [c for c in enabled if by_class[c] >= thresholds[c]]
            tier = _filter_tier(flagged, args.policy)
            tiers[tier].append(e)
            decisions.append({
                "audio_path": e.audio_path,
                "probs": by_class,
                "kept": tier == "keep",
                "reasons": flagged,
                "tier": tier,
            })

    os.makedirs(args.out_dir, exist_ok=True)
    write_manifest(tiers["keep"], os.path.join(args.out_dir, "kept.jsonl"))
    rejected = tiers["reject"] + tiers["enhance"] + tiers["discard"]
    write_manifest(rejected, os.path.join(args.out_dir, "rejected.jsonl"))
    if args.policy == "two-tier":
        write_manifest(tiers["enhance"], os.path.join(args.out_dir, "enhance.jsonl"))
        write_manifest(tiers["discard"], os.path.join(args.out_dir, "discard.jsonl"))
    with open(os.path.join(args.out_dir, "decisions.jsonl"), "w", encoding="utf-8") as f:
        for d in decisions:
            f.write(json.dumps(d, sort_keys=True) + "\n")

    summary = {"input": len(entries), "kept": len(tiers["keep"]), "rejected": len(rejected)}
    if args.policy == "two-tier":
        summary["enhance"] = len(tiers["enhance"])
        summary["discard"] = len(tiers["discard"])
    print(json.dumps(summary))
    return 0


def cmd_ingest(args):
    try:
        ratios = tuple(float(x) for x in args.ratios.split(","))
    except ValueError:
        raise ConfigError(f"--ratios must be three comma-separated numbers, got {args.ratios!r}") from None
    entries = ingest_labelstudio(args.export_file)
    if not entries:
        raise DataError(f"{args.export_file}: no usable tasks")
    assigned = seeded_split(entries, ratios, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    summary = {}
    for split in ("train", "val", "test"):
        part = split_entries(assigned, split)
        write_manifest(part, os.path.join(args.out_dir, f"{split}.jsonl"))
        summary[split] = label_counts(part)
    with open(os.path.join(args.out_dir, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(json.dumps(summary, sort_keys=True))
    return 0


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="whilter",
        description="Multitask speech-data filtering: train, evaluate, and filter manifests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="stage-1 training with dynamic mixing")
    _add_run_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_ft = sub.add_parser("finetune", help="stage-2 training with augmentations")
    _add_run_flags(p_ft)
    p_ft.add_argument("--init-from", metavar="CKPT", help="stage-1 checkpoint to start from")
    p_ft.set_defaults(func=cmd_finetune)

    def common_eval_flags(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--split", default="all", choices=("train", "val", "test", "all"))
        p.add_argument("--out-dir", required=True)
        p.add_argument("--backend", default="mock", choices=("mock", "file"))
        p.add_argument("--mock-seed", type=int, default=1234)
        p.add_argument("--audio-root", default="")
        p.add_argument("--thresholds", default="", help="per-class thresholds, e.g. music=0.6,noise=0.4")

    p_eval = sub.add_parser("eval", help="write text/CSV/JSONL metric reports")
    common_eval_flags(p_eval)
    p_eval.add_argument("--timing", default="wall", choices=("wall", "off"))
    p_eval.set_defaults(func=cmd_eval)

    p_filter = sub.add_parser("filter", help="partition a manifest by model scores")
    common_eval_flags(p_filter)
    p_filter.add_argument("--disable", action="append", metavar="CLASS",
                          help="ignore this class when filtering (repeatable)")
    p_filter.add_argument("--policy", default="reject", choices=("reject", "two-tier"))
    p_filter.add_argument("--batch-size", type=int, default=32)
    p_filter.set_defaults(func=cmd_filter)

    p_ingest = sub.add_parser("ingest", help="annotation export -> split manifests")
    p_ingest.add_argument("--export", dest="export_file", required=True)
    p_ingest.add_argument("--out-dir", required=True)
    p_ingest.add_argument("--ratios", default="0.857,0.063,0.080",
                          help="train,val,test fractions summing to 1")
    p_ingest.add_argument("--seed", type=int, default=0)
    p_ingest.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except WhilterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
