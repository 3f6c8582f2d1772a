"""Run configuration: presets, precedence, validation, INI round trip."""

import pytest

from whilter.config import (
    FIELD_SECTIONS,
    RunConfig,
    STAGE_PRESETS,
    config_as_ini,
    load_run_config,
    parse_thresholds,
    read_config_file,
)
from whilter.errors import ConfigError


class TestStagePresets:
    def test_simulated_recipe(self):
        cfg = load_run_config(forced_stage="simulated")
        assert (cfg.epochs, cfg.eta, cfg.gamma) == (10, 1e-5, 0.7)

    def test_finetune_recipe(self):
        cfg = load_run_config(forced_stage="finetune")
        assert (cfg.epochs, cfg.eta, cfg.gamma) == (100, 1e-5, 0.98)

    def test_preset_table_matches(self):
        assert STAGE_PRESETS["simulated"] == {"epochs": 10, "eta": 1e-5, "gamma": 0.7}
        assert STAGE_PRESETS["finetune"] == {"epochs": 100, "eta": 1e-5, "gamma": 0.98}


class TestPrecedence:
    def test_flag_beats_file_beats_preset(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nepochs = 3\ngamma = 0.5\n")
        cfg = load_run_config(ini, {"epochs": "5"}, forced_stage="simulated")
        assert cfg.epochs == 5      # flag wins
        assert cfg.gamma == 0.5     # file beats preset
        assert cfg.eta == 1e-5      # preset fills the rest

    def test_file_may_state_matching_stage(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nstage = finetune\n")
        cfg = load_run_config(ini, forced_stage="finetune")
        assert cfg.epochs == 100

    def test_conflicting_stage_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nstage = finetune\n")
        with pytest.raises(ConfigError, match="conflicts"):
            load_run_config(ini, forced_stage="simulated")
        with pytest.raises(ConfigError, match="conflicts"):
            load_run_config(None, {"stage": "finetune"}, forced_stage="simulated")

    def test_string_overrides_parsed_by_type(self):
        cfg = load_run_config(None, {"batch_size": "16", "positional": "false"},
                              forced_stage="simulated")
        assert cfg.batch_size == 16 and cfg.positional is False

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_run_config(None, {"learning_rate": "0.1"})


class TestConfigFile:
    def test_sections_route_keys(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text(
            "[run]\nseed = 7\n[data]\nfeature_backend = mock\n"
            "[model]\nmodel_dim = 128\ntf_heads = 8\n[mix]\nsnr_lo = -3\n"
        )
        values = read_config_file(ini)
        assert values == {"seed": 7, "feature_backend": "mock",
                          "model_dim": 128, "tf_heads": 8, "snr_lo": -3.0}

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nlr = 0.1\n")
        with pytest.raises(ConfigError, match="unknown config key 'lr'"):
            read_config_file(ini)

    def test_key_in_wrong_section_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nmodel_dim = 64\n")
        with pytest.raises(ConfigError, match=r"belongs in \[model\]"):
            read_config_file(ini)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "nope.ini")

    def test_bad_value_type_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nepochs = soon\n")
        with pytest.raises(ConfigError, match="expected int"):
            read_config_file(ini)

    def test_bad_bool_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[model]\npositional = maybe\n")
        with pytest.raises(ConfigError, match="boolean"):
            read_config_file(ini)

    def test_ini_round_trip(self, tmp_path):
        cfg = load_run_config(
            None,
            {"seed": "9", "model_dim": "64", "tf_heads": "8", "thresholds": "music=0.7"},
            forced_stage="finetune",
        )
        ini = tmp_path / "echo.ini"
        ini.write_text(config_as_ini(cfg))
        back = load_run_config(ini)
        assert back == cfg


class TestValidation:
    def test_reserved_hooks_must_stay_zero(self):
        with pytest.raises(ConfigError, match="weight_decay"):
            load_run_config(None, {"weight_decay": "0.01"}, forced_stage="simulated")
        with pytest.raises(ConfigError, match="grad_clip"):
            load_run_config(None, {"grad_clip": "1.0"}, forced_stage="simulated")

    def test_bad_backend_and_timing(self):
        with pytest.raises(ConfigError, match="feature_backend"):
            RunConfig(feature_backend="gpu").validate()
        with pytest.raises(ConfigError, match="timing"):
            RunConfig(timing="cpu").validate()

    def test_empty_snr_range(self):
        with pytest.raises(ConfigError, match="snr range"):
            RunConfig(snr_lo=5.0, snr_hi=-5.0).validate()

    def test_bad_stage(self):
        with pytest.raises(ConfigError, match="stage"):
            RunConfig(stage="pretrain").validate()


class TestSpeechRatio:
    def test_default_parses_to_half_quarter_quarter(self):
        assert RunConfig().speech_probs() == [0.5, 0.25, 0.25]

    def test_english_only(self):
        assert RunConfig(speech_ratio="1:0:0").speech_probs() == [1.0, 0.0, 0.0]

    def test_wrong_arity(self):
        with pytest.raises(ConfigError):
            RunConfig(speech_ratio="2:1").speech_probs()

    def test_negative_part(self):
        with pytest.raises(ConfigError):
            RunConfig(speech_ratio="2:-1:1").speech_probs()

    def test_non_numeric(self):
        with pytest.raises(ConfigError):
            RunConfig(speech_ratio="a:b:c").speech_probs()


class TestThresholds:
    def test_empty_means_all_half(self):
        t = parse_thresholds("")
        assert set(t.values()) == {0.5} and len(t) == 5

    def test_partial_override(self):
        t = parse_thresholds("music=0.6, noise=0.4")
        assert t["music"] == 0.6 and t["noise"] == 0.4 and t["foreign"] == 0.5

    def test_unknown_class(self):
        with pytest.raises(ConfigError, match="unknown class"):
            parse_thresholds("speechiness=0.5")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="bad threshold"):
            parse_thresholds("music=loud")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="class=value"):
            parse_thresholds("music")


class TestRegistry:
    def test_every_field_has_a_section(self):
        from dataclasses import fields

        assert set(FIELD_SECTIONS) == {f.name for f in fields(RunConfig)}

    def test_model_config_projection(self):
        cfg = RunConfig(model_dim=64, tf_heads=8)
        mc = cfg.model_config()
        assert mc.model_dim == 64 and mc.tf_heads == 8 and mc.n_classes == 5
