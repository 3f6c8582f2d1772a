"""Run configuration: INI files, stage presets, and flag overrides.

Precedence (highest first): command-line flag > config file > stage
preset > static default.  Stage presets pin the published two-stage
recipe: the simulated stage runs 10 epochs at eta 1e-5 with gamma 0.7,
the fine-tuning stage 100 epochs at eta 1e-5 with gamma 0.98.

Every key lives in an INI section and is mirrored by a flag of the same
name (underscores become dashes), e.g. [run] eta=1e-5 and --eta 1e-5.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

from .errors import ConfigError
from .labels import CLASS_NAMES
from .model import ModelConfig

STAGES = ("simulated", "finetune")

# key -> (section, type); defaults live on the dataclass, stage presets below
FIELD_SECTIONS = {
    "stage": ("run", str),
    "seed": ("run", int),
    "epochs": ("run", int),
    "samples_per_epoch": ("run", int),
    "batch_size": ("run", int),
    "eta": ("run", float),
    "gamma": ("run", float),
    "weight_decay": ("run", float),
    "grad_clip": ("run", float),
    "checkpoint_dir": ("run", str),
    "loss_log": ("run", str),
    "train_manifest": ("data", str),
    "val_manifest": ("data", str),
    "audio_root": ("data", str),
    "pool_english": ("data", str),
    "pool_foreign": ("data", str),
    "pool_synthetic": ("data", str),
    "pool_music": ("data", str),
    "pool_noise": ("data", str),
    "feature_backend": ("data", str),
    "mock_seed": ("data", int),
    "n_classes": ("model", int),
    "encoder_layers": ("model", int),
    "frames": ("model", int),
    "enc_dim": ("model", int),
    "model_dim": ("model", int),
    "tf_layers": ("model", int),
    "tf_heads": ("model", int),
    "ff_dim": ("model", int),
    "dropout_p": ("model", float),
    "positional": ("model", bool),
    "snr_lo": ("mix", float),
    "snr_hi": ("mix", float),
    "speech_ratio": ("mix", str),
    "aug_prob": ("augment", float),
    "timing": ("eval", str),
    "thresholds": ("filter", str),
}

STAGE_PRESETS = {
    "simulated": {"epochs": 10, "eta": 1e-5, "gamma": 0.7},
    "finetune": {"epochs": 100, "eta": 1e-5, "gamma": 0.98},
}


@dataclass
class RunConfig:
    stage: str = "simulated"
    seed: int = 0
    epochs: int = 10
    samples_per_epoch: int = 15000
    batch_size: int = 64
    eta: float = 1e-5
    gamma: float = 0.7
    weight_decay: float = 0.0
    grad_clip: float = 0.0
    checkpoint_dir: str = "checkpoints"
    loss_log: str = ""
    train_manifest: str = ""
    val_manifest: str = ""
    audio_root: str = ""
    pool_english: str = ""
    pool_foreign: str = ""
    pool_synthetic: str = ""
    pool_music: str = ""
    pool_noise: str = ""
    feature_backend: str = "mock"
    mock_seed: int = 1234
    n_classes: int = 5
    encoder_layers: int = 12
    frames: int = 1500
    enc_dim: int = 768
    model_dim: int = 256
    tf_layers: int = 4
    tf_heads: int = 4
    ff_dim: int = 1024
    dropout_p: float = 0.1
    positional: bool = True
    snr_lo: float = -5.0
    snr_hi: float = 10.0
    speech_ratio: str = "2:1:1"
    aug_prob: float = 0.2
    timing: str = "wall"
    thresholds: str = ""

    def validate(self):
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.batch_size < 1 or self.samples_per_epoch < 1 or self.epochs < 0:
            raise ConfigError("epochs, batch_size, samples_per_epoch must be positive")
        if self.weight_decay != 0.0:
            raise ConfigError("weight_decay is a reserved hook; only 0.0 is supported")
        if self.grad_clip != 0.0:
            raise ConfigError("grad_clip is a reserved hook; only 0.0 is supported")
        if self.feature_backend not in ("mock", "file"):
            raise ConfigError(f"feature_backend must be 'mock' or 'file', got {self.feature_backend!r}")
        if self.timing not in ("wall", "off"):
            raise ConfigError(f"timing must be 'wall' or 'off', got {self.timing!r}")
        if self.snr_hi < self.snr_lo:
            raise ConfigError(f"snr range [{self.snr_lo}, {self.snr_hi}] is empty")
        self.speech_probs()
        self.threshold_map()
        return self

    def model_config(self):
        return ModelConfig(
            n_classes=self.n_classes,
            encoder_layers=self.encoder_layers,
            frames=self.frames,
            enc_dim=self.enc_dim,
            model_dim=self.model_dim,
            tf_layers=self.tf_layers,
            tf_heads=self.tf_heads,
            ff_dim=self.ff_dim,
            dropout_p=self.dropout_p,
            positional=self.positional,
        )

    def speech_probs(self):
        parts = self.speech_ratio.split(":")
        if len(parts) != 3:
            raise ConfigError(f"speech_ratio must be english:foreign:synthetic, got {self.speech_ratio!r}")
        try:
            ratio = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"bad speech_ratio {self.speech_ratio!r}") from None
        total = sum(ratio)
        if total <= 0 or min(ratio) < 0:
            raise ConfigError(f"speech_ratio parts must be non-negative with positive sum: {self.speech_ratio!r}")
        return [r / total for r in ratio]

    def threshold_map(self):
        return parse_thresholds(self.thresholds)


def parse_thresholds(text):
    """"music=0.6,noise=0.4" -> full per-class map (unlisted classes 0.5)."""
    out = {c: 0.5 for c in CLASS_NAMES}
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"threshold {part!r} must look like class=value")
        name, _, value = part.partition("=")
        name = name.strip()
        if name not in CLASS_NAMES:
            raise ConfigError(f"unknown class {name!r} in thresholds (valid: {', '.join(CLASS_NAMES)})")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"bad threshold value {value!r} for class {name!r}") from None
    return out


def _parse_value(key, raw):
    section, typ = FIELD_SECTIONS[key]
    if typ is bool:
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None


def read_config_file(path):
    """INI file -> key -> parsed value; unknown sections/keys are errors."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from None
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in FIELD_SECTIONS:
                raise ConfigError(f"{path}: unknown config key '{key}' in [{section}]")
            expected_section = FIELD_SECTIONS[key][0]
            if section != expected_section:
                raise ConfigError(
                    f"{path}: key '{key}' belongs in [{expected_section}], found in [{section}]"
                )
            out[key] = _parse_value(key, raw)
    return out


def load_run_config(config_path=None, overrides=None, forced_stage=None):
    """Merge flags > file > stage preset > defaults into a RunConfig."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in overrides:
        if key not in FIELD_SECTIONS:
            raise ConfigError(f"unknown config key '{key}'")
    file_values = read_config_file(config_path) if config_path else {}

    requested = overrides.get("stage") or file_values.get("stage")
    if forced_stage and requested and requested != forced_stage:
        raise ConfigError(
            f"stage {requested!r} conflicts with the '{forced_stage}' command"
        )
    stage = forced_stage or requested or "simulated"
    if stage not in STAGES:
        raise ConfigError(f"stage must be one of {STAGES}, got {stage!r}")

    values = {"stage": stage}
    values.update(STAGE_PRESETS[stage])
    values.update(file_values)
    values.update({k: _parse_value(k, v) if isinstance(v, str) else v for k, v in overrides.items()})
    values["stage"] = stage

    known = {f.name for f in fields(RunConfig)}
    assert set(FIELD_SECTIONS) == known, "field registry out of sync"
    return RunConfig(**values).validate()


def config_as_ini(cfg):
    """Render a RunConfig back to INI text (diff-able experiment record)."""
    by_section = {}
    for f in fields(cfg):
        section, _ = FIELD_SECTIONS[f.name]
        by_section.setdefault(section, []).append((f.name, getattr(cfg, f.name)))
    lines = []
    for section in ("run", "data", "model", "mix", "augment", "eval", "filter"):
        if section not in by_section:
            continue
        lines.append(f"[{section}]")
        for key, value in by_section[section]:
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
