"""SMG construction order, spec loading, and the bundled defaults."""

from __future__ import annotations

import json

import numpy as np
import pytest

from smart.core_types import MGKind, MetricKind, SourceFrame
from smart.metrics import angle_difference, determine_ub
from smart.core_types import SteeringAngle
from smart.smg import (
    InvalidSpec,
    ParseError,
    equal_partitions,
    generate_smg,
    load_default_specs,
    load_smg_specs,
    offset_label,
    position_sweep,
    spec_from_json,
    spec_to_json,
)

from conftest import single_insert_spec


class TestDefaults:
    def test_four_sweeps_with_expected_references(self):
        specs = load_default_specs()
        assert [s.name for s in specs] == ["SMG1", "SMG2", "SMG3", "SMG4"]
        assert [s.reference.label for s in specs] == ["center", "center", "car-red", "car"]

    def test_position_sweeps_have_nine_offsets(self):
        specs = {s.name: s for s in load_default_specs()}
        for name in ("SMG1", "SMG2"):
            offsets = [c.lateral_offset_px for c in specs[name].configs]
            assert offsets == [-400, -300, -200, -100, 0, 100, 200, 300, 400]

    def test_smg3_colors(self):
        spec = {s.name: s for s in load_default_specs()}["SMG3"]
        assert spec.labels == ("car-red", "car-blue", "car-grey")

    def test_smg4_snow_ladder(self):
        spec = {s.name: s for s in load_default_specs()}["SMG4"]
        assert spec.labels == ("car", "car+snow:0.2", "car+snow:0.4", "car+snow:0.6",
                               "car+snow:0.8", "car+snow:1.0")
        intensities = [c.snow_intensity for c in spec.configs[1:]]
        assert intensities == [0.2, 0.4, 0.6, 0.8, 1.0]


class TestGenerateSMG:
    def test_smg1_produces_nine_groups_in_order(self, small_corpus, small_ctx):
        spec = {s.name: s for s in load_default_specs()}["SMG1"]
        instance = generate_smg(spec, small_corpus[0], small_ctx)
        assert [g.config.label for g in instance.groups] == [
            "left-400", "left-300", "left-200", "left-100", "center",
            "right-100", "right-200", "right-300", "right-400",
        ]

    def test_smg4_produces_six_groups(self, small_corpus, small_ctx):
        spec = {s.name: s for s in load_default_specs()}["SMG4"]
        instance = generate_smg(spec, small_corpus[0], small_ctx)
        assert len(instance.groups) == 6

    def test_single_reference_config_scores_zero_downstream(self, small_corpus, small_ctx):
        spec = single_insert_spec()
        instance = generate_smg(spec, small_corpus[0], small_ctx)
        assert len(instance.groups) == 1
        # the lone group is the reference, so its difference equals the
        # reference difference and every metric value is zero
        ad = angle_difference(SteeringAngle(0.4), SteeringAngle(0.1))
        record = determine_ub(spec.metric_kind, ad, ad, 0.0)
        assert record.m == 0.0 and record.u == 0

    def test_deterministic(self, small_corpus, small_ctx):
        spec = {s.name: s for s in load_default_specs()}["SMG4"]
        a = generate_smg(spec, small_corpus[0], small_ctx)
        b = generate_smg(spec, small_corpus[0], small_ctx)
        for ga, gb in zip(a.groups, b.groups):
            assert np.array_equal(ga.follow_up, gb.follow_up)

    def test_follow_up_dimensions_match_source(self, small_corpus, small_ctx):
        spec = {s.name: s for s in load_default_specs()}["SMG2"]
        instance = generate_smg(spec, small_corpus[0], small_ctx)
        for group in instance.groups:
            assert group.follow_up.shape == small_corpus[0].image.shape


class TestSpecLoading:
    def test_duplicate_labels_invalid(self, tmp_path):
        doc = {"smgs": [{
            "name": "S", "metric": "unchange", "reference": 0,
            "configs": [
                {"kind": "object_color_variant", "label": "a", "sprite": "car-red"},
                {"kind": "object_color_variant", "label": "a", "sprite": "car-blue"},
            ],
        }]}
        path = tmp_path / "specs.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InvalidSpec):
            load_smg_specs(path)

    def test_reference_out_of_range_invalid(self, tmp_path):
        doc = {"smgs": [{
            "name": "S", "metric": "unchange", "reference": 5,
            "configs": [{"kind": "object_color_variant", "label": "a", "sprite": "car-red"}],
        }]}
        path = tmp_path / "specs.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InvalidSpec):
            load_smg_specs(path)

    def test_unknown_reference_label_invalid(self, tmp_path):
        doc = {"smgs": [{
            "name": "S", "metric": "unchange", "reference": "missing",
            "configs": [{"kind": "object_color_variant", "label": "a", "sprite": "car-red"}],
        }]}
        path = tmp_path / "specs.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(InvalidSpec):
            load_smg_specs(path)

    def test_parse_error_carries_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"smgs": [}')
        with pytest.raises(ParseError) as err:
            load_smg_specs(path)
        assert "line" in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_smg_specs(tmp_path / "nope.json")

    def test_round_trip(self):
        for spec in load_default_specs():
            assert spec_from_json(spec_to_json(spec)) == spec


class TestHelpers:
    def test_equal_partitions(self):
        assert equal_partitions(-400, 400, 9) == [-400, -300, -200, -100, 0, 100, 200, 300, 400]
        assert equal_partitions(0, 1, 2) == [0.0, 1.0]
        assert equal_partitions(5, 9, 1) == [5]

    def test_offset_labels(self):
        assert offset_label(-200) == "left-200"
        assert offset_label(0) == "center"
        assert offset_label(300) == "right-300"

    def test_position_sweep_builder(self):
        spec = position_sweep("mine", "car-red", offsets=[-200, 0, 200], metric_kind=MetricKind.RIGHTWARD)
        assert spec.labels == ("left-200", "center", "right-200")
        assert spec.reference.label == "center"
        assert spec.metric_kind is MetricKind.RIGHTWARD
        assert all(c.kind is MGKind.OBJECT_INSERT for c in spec.configs)
