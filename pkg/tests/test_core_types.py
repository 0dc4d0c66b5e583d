"""Construction-time validation of the domain types."""

from __future__ import annotations

import math

import numpy as np
import pytest

from smart.core_types import (
    MGConfig,
    MGKind,
    MetricKind,
    ModelStats,
    SMGSpec,
    SourceFrame,
    SteeringAngle,
    UBRecord,
    ValidationError,
)


def _config(label="center", offset=0):
    return MGConfig(kind=MGKind.OBJECT_INSERT, label=label, lateral_offset_px=offset, sprite_id="car-red")


class TestSteeringAngle:
    @pytest.mark.parametrize("value", [-1.0, -0.5, 0.0, 0.25, 1.0])
    def test_accepts_range(self, value):
        assert SteeringAngle(value).value == value

    @pytest.mark.parametrize("value", [-1.0001, 1.0001, math.nan])
    def test_rejects_out_of_range(self, value):
        with pytest.raises(ValidationError):
            SteeringAngle(value)


class TestSourceFrame:
    def test_requires_uint8_rgb(self):
        with pytest.raises(ValidationError):
            SourceFrame(frame_id=0, image=np.zeros((4, 4, 3), dtype=np.float32))
        with pytest.raises(ValidationError):
            SourceFrame(frame_id=0, image=np.zeros((4, 4), dtype=np.uint8))

    def test_rejects_negative_id(self):
        with pytest.raises(ValidationError):
            SourceFrame(frame_id=-1, image=np.zeros((4, 4, 3), dtype=np.uint8))


class TestMGConfig:
    def test_positional_requires_offset(self):
        with pytest.raises(ValidationError):
            MGConfig(kind=MGKind.OBJECT_INSERT, label="x", sprite_id="car-red")

    def test_offset_must_be_in_sweep_set(self):
        with pytest.raises(ValidationError):
            _config(offset=150)

    def test_color_variant_rejects_offset(self):
        with pytest.raises(ValidationError):
            MGConfig(kind=MGKind.OBJECT_COLOR_VARIANT, label="x", lateral_offset_px=100, sprite_id="car-blue")

    def test_snow_kind_requires_intensity(self):
        with pytest.raises(ValidationError):
            MGConfig(kind=MGKind.OBJECT_PLUS_SNOW, label="x", sprite_id="car-red")
        with pytest.raises(ValidationError):
            MGConfig(kind=MGKind.OBJECT_PLUS_SNOW, label="x", sprite_id="car-red", snow_intensity=1.5)

    def test_snow_intensity_only_for_snow_kind(self):
        with pytest.raises(ValidationError):
            MGConfig(kind=MGKind.OBJECT_INSERT, label="x", lateral_offset_px=0,
                     sprite_id="car-red", snow_intensity=0.5)

    def test_offset_property_defaults_to_center(self):
        config = MGConfig(kind=MGKind.OBJECT_COLOR_VARIANT, label="x", sprite_id="car-blue")
        assert config.offset == 0


class TestSMGSpec:
    def test_reference_index_bounds(self):
        with pytest.raises(ValidationError):
            SMGSpec(name="s", configs=(_config(),), reference_index=1, metric_kind=MetricKind.UNCHANGE)

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError):
            SMGSpec(
                name="s",
                configs=(_config("a", 0), _config("a", 100)),
                reference_index=0,
                metric_kind=MetricKind.UNCHANGE,
            )

    def test_empty_configs_rejected(self):
        with pytest.raises(ValidationError):
            SMGSpec(name="s", configs=(), reference_index=0, metric_kind=MetricKind.UNCHANGE)

    def test_source_label_reserved(self):
        with pytest.raises(ValidationError):
            SMGSpec(name="s", configs=(_config("source", 0),), reference_index=0,
                    metric_kind=MetricKind.UNCHANGE)


class TestUBRecord:
    def test_consistent_verdict_required(self):
        with pytest.raises(ValidationError):
            UBRecord(metric_kind=MetricKind.UNCHANGE, m=0.5, theta=0.2, u=0)

    def test_metric_range_enforced(self):
        with pytest.raises(ValidationError):
            UBRecord(metric_kind=MetricKind.UNCHANGE, m=1.5, theta=0.2, u=1)


class TestModelStats:
    def test_rmse_must_dominate_mae(self):
        with pytest.raises(ValidationError):
            ModelStats(mae=0.5, rmse=0.3, corr=0.0, stdev=0.1)

    def test_nan_corr_allowed(self):
        stats = ModelStats(mae=0.0, rmse=0.0, corr=math.nan, stdev=0.0)
        assert math.isnan(stats.corr)
