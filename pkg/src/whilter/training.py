"""Two-stage training engine.

Stage "simulated" draws class-weighted batches of base clips and
dynamically mixes a quarter of each batch per interferer family; stage
"finetune" starts from a stage-1 checkpoint and applies waveform
augmentations in place of the mixing.  Both decay the learning rate as
eta * gamma**epoch and log one JSONL line per iteration.

All randomness flows through one generator seeded from the config, in a
fixed draw order (model init, then per epoch: batch sampling, then per
batch: mixing or augmentation draws, then dropout), so a rerun with the
same seed and config reproduces the loss log bit for bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .audio import load_wav
from .augment import AugmentConfig, augment
from .config import RunConfig
from .errors import ConfigError, DataError
from .features import MockBackend, MockEncoder, pad_or_truncate
from .labels import CLASS_NAMES
from .manifest import parse_manifest, split_entries
from .metrics import evaluate
from .mixing import MixItem, MixPools, dynamic_mix
from .model import Whilter, load_checkpoint, save_checkpoint, train_step
from .optim import Adam, lr_at
from .sampling import compute_class_weights, epoch_batches


class Trainer:
    def __init__(self, cfg: RunConfig):
        cfg.validate()
        if cfg.feature_backend != "mock":
            # Mixed/augmented waveforms exist only in process; there are no
            # precomputed sidecars for them.
            raise ConfigError(
                "training requires feature_backend=mock; the file backend only "
                "serves unmodified clips (eval/filter)"
            )
        if not cfg.train_manifest:
            raise ConfigError("train_manifest is required")
        self.cfg = cfg
        self.model_config = cfg.model_config()
        self.encoder = MockEncoder(
            layers=cfg.encoder_layers, frames=cfg.frames,
            dim=cfg.enc_dim, seed=cfg.mock_seed,
        )
        self.backend = MockBackend(self.encoder)
        self.n_samples = self.backend.n_samples
        self.speech_probs = np.asarray(cfg.speech_probs())

        entries = parse_manifest(cfg.train_manifest)
        self.train_entries = split_entries(entries, "train") or entries
        if not self.train_entries:
            raise DataError(f"{cfg.train_manifest}: no train entries")
        self.class_weights = compute_class_weights(self.train_entries)

        self.val_entries = None
        if cfg.val_manifest:
            val = parse_manifest(cfg.val_manifest)
            self.val_entries = split_entries(val, "val") or val

        self.pools = self._load_pools() if cfg.stage == "simulated" else None
        self.aug_config = AugmentConfig(prob=cfg.aug_prob)
        self.loss_log_path = cfg.loss_log or os.path.join(cfg.checkpoint_dir, "loss_log.jsonl")
        self.val_log_path = os.path.join(cfg.checkpoint_dir, "val_log.jsonl")

    # -- data plumbing ---------------------------------------------------
    def _audio_path(self, rel):
        return os.path.join(self.cfg.audio_root, rel) if self.cfg.audio_root else rel

    def _load(self, path):
        return load_wav(self._audio_path(path))

    def _load_pools(self):
        paths = {
            "english": self.cfg.pool_english,
            "foreign": self.cfg.pool_foreign,
            "synthetic": self.cfg.pool_synthetic,
            "music": self.cfg.pool_music,
            "noise": self.cfg.pool_noise,
        }
        speech_kinds = ("english", "foreign", "synthetic")
        probs = dict(zip(speech_kinds, self.speech_probs))
        pools = MixPools()
        for kind, manifest_path in paths.items():
            required = kind in ("music", "noise") or probs.get(kind, 0.0) > 0
            if not manifest_path:
                if required:
                    raise ConfigError(f"stage 'simulated' needs pool_{kind}")
                continue
            for e in parse_manifest(manifest_path):
                speakers = e.labels.speaker_count(assume_speech=kind in speech_kinds)
                pools.pool(kind).append((e.audio_path, e.labels, speakers))
        return pools

    def _batch_items(self, entry_indices):
        items = []
        for i in entry_indices:
            e = self.train_entries[i]
            w = pad_or_truncate(self._load(e.audio_path), self.n_samples)
            items.append(MixItem(w, e.labels, e.labels.speaker_count(assume_speech=True)))
        return items

    def _features(self, items):
        stacks = np.stack([self.backend.extract(it.waveform) for it in items])
        targets = np.stack([it.labels.as_array(np.float64) for it in items])
        return stacks, targets

    # -- validation --------------------------------------------------------
    def _validate(self, model):
        reports = evaluate(
            model, self.val_entries, self.backend,
            thresholds={c: 0.5 for c in CLASS_NAMES}, timing="off",
            load_waveform=lambda e: self._load(e.audio_path),
        )
        macro_f1 = float(np.mean([r.f1 for r in reports]))
        return macro_f1, {r.class_name: r.f1 for r in reports}

    # -- main loop ----------------------------------------------------------
    def run(self, resume_from=None, init_from=None, log=print):
        cfg = self.cfg
        os.makedirs(cfg.checkpoint_dir, exist_ok=True)
        rng = np.random.default_rng(cfg.seed)
        start_epoch = 0

        if resume_from:
            model, optimizer, saved_rng, last_epoch = load_checkpoint(
                resume_from, expect_config=self.model_config, lr=cfg.eta,
            )
            if optimizer is None or saved_rng is None:
                raise ConfigError(f"{resume_from}: checkpoint lacks optimizer/rng state, cannot resume")
            rng = saved_rng
            start_epoch = last_epoch + 1
            log_mode = "a"
        else:
            model = Whilter(self.model_config, rng)
            if init_from:
                base, _, _, _ = load_checkpoint(init_from, expect_config=self.model_config)
                model.load_state(base.state())
            optimizer = Adam(model.parameters(), lr=cfg.eta)
            log_mode = "w"

        best_f1 = -1.0
        best_path = os.path.join(cfg.checkpoint_dir, "best")
        mean_loss = float("nan")

        with open(self.loss_log_path, log_mode, encoding="utf-8") as loss_log, \
                open(self.val_log_path, log_mode, encoding="utf-8") as val_log:
            for epoch in range(start_epoch, cfg.epochs):
                lr = lr_at(epoch, cfg.eta, cfg.gamma)
                optimizer.lr = lr
                batches = epoch_batches(
                    self.train_entries, self.class_weights, rng,
                    cfg.samples_per_epoch, cfg.batch_size,
                )
                losses = []
                for it, batch_idx in enumerate(batches):
                    items = self._batch_items(batch_idx)
                    if cfg.stage == "simulated":
                        dynamic_mix(
                            items, self.pools, rng,
                            snr_range=(cfg.snr_lo, cfg.snr_hi),
                            speech_probs=self.speech_probs,
                            load=self._load,
                        )
                    else:
                        for item in items:
                            item.waveform = augment(item.waveform, rng, self.aug_config)
                    stacks, targets = self._features(items)
                    loss = train_step(model, optimizer, stacks, targets, rng)
                    losses.append(loss)
                    loss_log.write(json.dumps(
                        {"epoch": epoch, "iter": it, "loss": loss, "lr": lr}
                    ) + "\n")
                loss_log.flush()

                mean_loss = float(np.mean(losses)) if losses else float("nan")
                ckpt = os.path.join(cfg.checkpoint_dir, f"epoch_{epoch:04d}")
                save_checkpoint(ckpt, model, optimizer, rng, epoch)

                if self.val_entries:
                    macro_f1, per_class = self._validate(model)
                    val_log.write(json.dumps(
                        {"epoch": epoch, "val_macro_f1": macro_f1, "per_class_f1": per_class}
                    ) + "\n")
                    val_log.flush()
                    if macro_f1 > best_f1:
                        best_f1 = macro_f1
                        save_checkpoint(best_path, model, optimizer, rng, epoch)
                    log(f"epoch {epoch}: lr {lr:.3e}  mean loss {mean_loss:.4f}  val macro-F1 {macro_f1:.3f}")
                else:
                    log(f"epoch {epoch}: lr {lr:.3e}  mean loss {mean_loss:.4f}")

        last = cfg.epochs - 1
        final = os.path.join(cfg.checkpoint_dir, f"epoch_{last:04d}") if last >= 0 else None
        return {
            "final_checkpoint": final,
            "best_checkpoint": best_path if best_f1 >= 0 else None,
            "best_val_macro_f1": best_f1 if best_f1 >= 0 else None,
            "last_epoch_mean_loss": mean_loss,
            "loss_log": self.loss_log_path,
        }
