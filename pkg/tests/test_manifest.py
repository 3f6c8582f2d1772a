"""Label vectors, JSONL manifests, annotation-export ingest, splits."""

import json
import math

import numpy as np
import pytest

from whilter.errors import ConfigError, ManifestError
from whilter.labels import CLASS_NAMES, LabelVector, compose_labels
from whilter.manifest import (
    ManifestEntry,
    entry_from_dict,
    ingest_labelstudio,
    label_counts,
    parse_manifest,
    seeded_split,
    split_entries,
    write_manifest,
)


def entry(path, split="train", **flags):
    base = {c: False for c in CLASS_NAMES}
    base.update(flags)
    return ManifestEntry(path, LabelVector(**base), split=split)


class TestLabelVector:
    def test_class_order_is_fixed(self):
        assert CLASS_NAMES == ("multispeaker", "music", "foreign", "noise", "synthetic")

    def test_truthy_values_coerced_to_bool(self):
        lv = LabelVector(1, 0, "x", [], None)
        assert lv.multispeaker is True and lv.music is False
        assert lv.foreign is True and lv.noise is False and lv.synthetic is False

    def test_as_array_order(self):
        lv = LabelVector(True, False, True, False, True)
        np.testing.assert_array_equal(lv.as_array(), [1, 0, 1, 0, 1])

    def test_speaker_count_must_match_flag(self):
        with pytest.raises(ManifestError):
            LabelVector(True, False, False, False, False, num_speakers=1)
        with pytest.raises(ManifestError):
            LabelVector(False, False, False, False, False, num_speakers=3)
        with pytest.raises(ManifestError):
            LabelVector(False, False, False, False, False, num_speakers=-1)

    def test_from_dict_reports_missing_class(self):
        d = {c: False for c in CLASS_NAMES if c != "noise"}
        with pytest.raises(ManifestError, match="missing label 'noise'"):
            LabelVector.from_dict(d)

    def test_dict_roundtrip(self):
        lv = LabelVector(True, True, False, False, False, num_speakers=2)
        assert LabelVector.from_dict(lv.as_dict()) == lv

    def test_classless_means_all_false(self):
        assert not LabelVector.classless().as_array(bool).any()

    def test_speaker_count_inference(self):
        assert LabelVector.classless().speaker_count() == 1
        assert LabelVector.classless().speaker_count(assume_speech=False) == 0
        assert LabelVector(True, False, False, False, False).speaker_count() == 2
        assert LabelVector(True, False, False, False, False, num_speakers=4).speaker_count() == 4


class TestComposeLabels:
    def test_flags_or_and_counts_add(self):
        speech = LabelVector.classless(num_speakers=1)
        music = LabelVector(False, True, False, False, False, num_speakers=0)
        out = compose_labels([(speech, 1), (music, 0)])
        assert out.music and not out.noise
        assert out.num_speakers == 1 and not out.multispeaker

    def test_two_speakers_become_multispeaker(self):
        a = LabelVector.classless(num_speakers=1)
        b = LabelVector(False, False, True, False, False, num_speakers=1)
        out = compose_labels([(a, 1), (b, 1)])
        assert out.multispeaker and out.foreign and out.num_speakers == 2

    def test_component_multispeaker_flag_is_recomputed_not_copied(self):
        # a single 2-speaker component keeps the flag through the sum rule
        two = LabelVector(True, False, False, False, False, num_speakers=2)
        out = compose_labels([(two, 2)])
        assert out.multispeaker and out.num_speakers == 2


class TestManifestIO:
    def test_roundtrip(self, tmp_path):
        entries = [
            entry("a.wav", music=True),
            entry("b.wav", split="val", foreign=True, noise=True),
            ManifestEntry("c.wav", LabelVector.classless(num_speakers=1),
                          split="test", source="pod", duration_s=3.5),
        ]
        p = tmp_path / "m.jsonl"
        write_manifest(entries, p)
        back = parse_manifest(p)
        assert back == entries

    def test_invalid_json_names_line(self, tmp_path):
        p = tmp_path / "m.jsonl"
        good = json.dumps(entry("a.wav").as_dict())
        p.write_text(good + "\n{broken\n")
        with pytest.raises(ManifestError, match="line 2"):
            parse_manifest(p)

    def test_duplicate_path_names_both_lines(self, tmp_path):
        p = tmp_path / "m.jsonl"
        line = json.dumps(entry("a.wav").as_dict())
        p.write_text(line + "\n\n" + line + "\n")
        with pytest.raises(ManifestError, match="line 3.*first seen on line 1"):
            parse_manifest(p)

    def test_bad_split_rejected(self):
        obj = entry("a.wav").as_dict()
        obj["split"] = "dev"
        with pytest.raises(ManifestError, match="bad split"):
            entry_from_dict(obj)

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text("\n" + json.dumps(entry("a.wav").as_dict()) + "\n\n")
        assert len(parse_manifest(p)) == 1

    def test_missing_audio_path(self):
        with pytest.raises(ManifestError, match="audio_path"):
            entry_from_dict({"labels": {c: False for c in CLASS_NAMES}})

    def test_split_entries_filters(self):
        entries = [entry("a.wav"), entry("b.wav", split="val"), entry("c.wav")]
        assert [e.audio_path for e in split_entries(entries, "val")] == ["b.wav"]

    def test_label_counts(self):
        entries = [
            entry("a.wav", music=True, noise=True),
            entry("b.wav"),
            entry("c.wav", music=True),
        ]
        counts = label_counts(entries)
        assert counts["music"] == 2 and counts["noise"] == 1
        assert counts["classless"] == 1 and counts["total"] == 3


def _task(audio, count, i=0, **bools):
    result = []
    if count is not None:
        result.append({"from_name": "num_speakers", "value": {"number": count}})
    for name, v in bools.items():
        result.append({"from_name": name, "value": {"choices": ["yes"] if v else []}})
    return {"id": i, "data": {"audio": audio}, "annotations": [{"result": result}]}


class TestIngest:
    def test_two_speakers_maps_to_multispeaker(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text(json.dumps([_task("clips/a.wav", 2)]))
        (e,) = ingest_labelstudio(p)
        assert e.labels.multispeaker and e.labels.num_speakers == 2
        assert e.audio_path == "clips/a.wav"

    def test_single_speaker_no_flags_is_classless(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text(json.dumps([_task("a.wav", 1)]))
        (e,) = ingest_labelstudio(p)
        assert not e.labels.as_array(bool).any()
        assert e.labels.num_speakers == 1

    def test_boolean_fields_copied(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text(json.dumps([_task("a.wav", 1, music=True, synthetic=True)]))
        (e,) = ingest_labelstudio(p)
        assert e.labels.music and e.labels.synthetic
        assert not e.labels.foreign and not e.labels.noise

    def test_missing_count_skipped_with_warning(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text(json.dumps([_task("a.wav", None), _task("b.wav", 1, i=1)]))
        with pytest.warns(UserWarning, match="missing speaker count"):
            entries = ingest_labelstudio(p)
        assert [e.audio_path for e in entries] == ["b.wav"]

    def test_malformed_json_reports_offset(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text('[{"data": }]')
        with pytest.raises(ManifestError, match="offset"):
            ingest_labelstudio(p)

    def test_top_level_object_rejected(self, tmp_path):
        p = tmp_path / "export.json"
        p.write_text("{}")
        with pytest.raises(ManifestError, match="array"):
            ingest_labelstudio(p)


class TestSeededSplit:
    def test_ratios_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            seeded_split([entry("a.wav")], (0.5, 0.3, 0.3), seed=0)

    def test_sizes_match_rounded_ratios(self):
        entries = [entry(f"{i}.wav") for i in range(21414)]
        out = seeded_split(entries, (0.857, 0.063, 0.080), seed=0)
        sizes = {s: len(split_entries(out, s)) for s in ("train", "val", "test")}
        # exact rounding semantics: round train and val, test absorbs the rest
        assert sizes["train"] == round(21414 * 0.857)
        assert sizes["val"] == round(21414 * 0.063)
        assert sum(sizes.values()) == 21414
        # three-decimal ratios pin each size only to within n * 0.0005
        slack = math.ceil(21414 * 0.0005)
        assert abs(sizes["train"] - 18346) <= slack
        assert abs(sizes["val"] - 1353) <= slack
        assert abs(sizes["test"] - 1716) <= slack

    def test_partition_preserves_every_entry(self):
        entries = [entry(f"{i}.wav") for i in range(101)]
        out = seeded_split(entries, (0.8, 0.1, 0.1), seed=3)
        assert sorted(e.audio_path for e in out) == sorted(e.audio_path for e in entries)

    def test_same_seed_same_assignment(self):
        entries = [entry(f"{i}.wav") for i in range(50)]
        a = seeded_split(entries, (0.6, 0.2, 0.2), seed=9)
        b = seeded_split(entries, (0.6, 0.2, 0.2), seed=9)
        assert [(e.audio_path, e.split) for e in a] == [(e.audio_path, e.split) for e in b]

    def test_different_seed_different_assignment(self):
        # compare path->split maps; output order alone does not carry the seed
        entries = [entry(f"{i}.wav") for i in range(200)]
        a = {e.audio_path: e.split for e in seeded_split(entries, (0.6, 0.2, 0.2), seed=1)}
        b = {e.audio_path: e.split for e in seeded_split(entries, (0.6, 0.2, 0.2), seed=2)}
        assert a != b
