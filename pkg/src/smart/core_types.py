"""Domain types shared by every other module.

All types here are immutable after construction and validate their numeric
contracts eagerly: a value that is out of range raises ValidationError at
construction time, never later in the pipeline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class SmartError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SmartError):
    """A domain value violated its construction-time contract."""


@dataclass(frozen=True)
class SteeringAngle:
    """Normalized steering command in [-1, 1].

    Positive values steer leftward (anticlockwise), negative values steer
    rightward (clockwise).
    """

    value: float

    def __post_init__(self) -> None:
        if not isinstance(self.value, (int, float)) or isinstance(self.value, bool):
            raise ValidationError(f"steering angle must be a real number, got {self.value!r}")
        v = float(self.value)
        if math.isnan(v) or not -1.0 <= v <= 1.0:
            raise ValidationError(f"steering angle {v} outside [-1, 1]")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, eq=False)
class SourceFrame:
    """One source image with its position in the trip and optional ground truth.

    frame_id is the timeframe index and doubles as the heatmap x-axis; corpora
    iterate in ascending frame_id order.
    """

    frame_id: int
    image: np.ndarray
    ground_truth: Optional[SteeringAngle] = None

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValidationError(f"frame_id must be >= 0, got {self.frame_id}")
        img = self.image
        if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
            raise ValidationError("frame image must be an HxWx3 array")
        if img.dtype != np.uint8:
            raise ValidationError(f"frame image must be uint8, got {img.dtype}")

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    @property
    def width(self) -> int:
        return int(self.image.shape[1])


class MGKind(enum.Enum):
    """The supported follow-up transformations."""

    OBJECT_INSERT = "object_insert"
    OBJECT_INSERT_ONCOMING = "object_insert_oncoming"
    OBJECT_COLOR_VARIANT = "object_color_variant"
    OBJECT_PLUS_SNOW = "object_plus_snow"


# Offsets accepted for position sweeps, in pixels relative to the center anchor.
POSITION_SWEEP_OFFSETS = (-400, -300, -200, -100, 0, 100, 200, 300, 400)


@dataclass(frozen=True)
class MGConfig:
    """One follow-up configuration: what to insert, where, and with what weather.

    Only the fields relevant to ``kind`` may be populated:

    * OBJECT_INSERT / OBJECT_INSERT_ONCOMING: lateral_offset_px and sprite_id
    * OBJECT_COLOR_VARIANT: sprite_id only (placed at the center anchor)
    * OBJECT_PLUS_SNOW: sprite_id and snow_intensity (placed at the center anchor)
    """

    kind: MGKind
    label: str
    lateral_offset_px: Optional[int] = None
    sprite_id: Optional[str] = None
    snow_intensity: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValidationError("config label must be non-empty")
        if not self.sprite_id:
            raise ValidationError(f"config {self.label!r}: sprite_id is required")
        positional = self.kind in (MGKind.OBJECT_INSERT, MGKind.OBJECT_INSERT_ONCOMING)
        if positional:
            if self.lateral_offset_px is None:
                raise ValidationError(f"config {self.label!r}: lateral_offset_px is required for {self.kind.value}")
            if self.lateral_offset_px not in POSITION_SWEEP_OFFSETS:
                raise ValidationError(
                    f"config {self.label!r}: lateral_offset_px {self.lateral_offset_px} "
                    f"not in {POSITION_SWEEP_OFFSETS}"
                )
        elif self.lateral_offset_px is not None:
            raise ValidationError(f"config {self.label!r}: lateral_offset_px not allowed for {self.kind.value}")
        if self.kind is MGKind.OBJECT_PLUS_SNOW:
            if self.snow_intensity is None:
                raise ValidationError(f"config {self.label!r}: snow_intensity is required for {self.kind.value}")
            if not 0.0 <= float(self.snow_intensity) <= 1.0:
                raise ValidationError(f"config {self.label!r}: snow_intensity {self.snow_intensity} outside [0, 1]")
        elif self.snow_intensity is not None:
            raise ValidationError(f"config {self.label!r}: snow_intensity not allowed for {self.kind.value}")

    @property
    def offset(self) -> int:
        """Lateral offset to apply at insertion; center when unset."""
        return 0 if self.lateral_offset_px is None else self.lateral_offset_px


class MetricKind(enum.Enum):
    """Which deviation metric scores a scenario."""

    UNCHANGE = "unchange"
    RIGHTWARD = "rightward"
    LEFTWARD = "leftward"


@dataclass(frozen=True)
class SMGSpec:
    """An ordered sweep of follow-up configurations with one designated reference.

    Exactly one metric kind applies to the whole sweep.
    """

    name: str
    configs: tuple[MGConfig, ...]
    reference_index: int
    metric_kind: MetricKind
    description: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("SMG name must be non-empty")
        configs = tuple(self.configs)
        object.__setattr__(self, "configs", configs)
        if not configs:
            raise ValidationError(f"SMG {self.name!r}: configs must be non-empty")
        if not 0 <= self.reference_index < len(configs):
            raise ValidationError(
                f"SMG {self.name!r}: reference_index {self.reference_index} out of range "
                f"for {len(configs)} configs"
            )
        labels = [c.label for c in configs]
        if len(set(labels)) != len(labels):
            dupes = sorted({l for l in labels if labels.count(l) > 1})
            raise ValidationError(f"SMG {self.name!r}: duplicate config labels {dupes}")
        if "source" in labels:
            raise ValidationError(f"SMG {self.name!r}: 'source' is reserved for the source image")

    @property
    def reference(self) -> MGConfig:
        return self.configs[self.reference_index]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.configs)


@dataclass(frozen=True)
class AngleDifference:
    """A follow-up/source angle difference paired with the sweep's reference difference."""

    ad: float
    ad_ref: float

    def __post_init__(self) -> None:
        for name, v in (("ad", self.ad), ("ad_ref", self.ad_ref)):
            if math.isnan(v) or not -2.0 <= v <= 2.0:
                raise ValidationError(f"{name} {v} outside [-2, 2]")


@dataclass(frozen=True)
class UBRecord:
    """One undesirable-behavior verdict: metric value, threshold, and binary outcome.

    The verdict is strict: u = 1 exactly when m > theta, so a tie at the
    threshold is not undesirable.
    """

    metric_kind: MetricKind
    m: float
    theta: float
    u: int

    def __post_init__(self) -> None:
        if math.isnan(self.m) or not 0.0 <= self.m <= 1.0:
            raise ValidationError(f"metric value {self.m} outside [0, 1]")
        if self.theta < 0.0:
            raise ValidationError(f"theta {self.theta} must be >= 0")
        if self.u not in (0, 1):
            raise ValidationError(f"verdict u must be 0 or 1, got {self.u}")
        if self.u != int(self.m > self.theta):
            raise ValidationError(f"verdict u={self.u} inconsistent with m={self.m}, theta={self.theta}")


@dataclass(frozen=True)
class ModelStats:
    """Corpus-level agreement between predictions and reference angles.

    corr is NaN when undefined (either series constant); stdev is the
    population standard deviation of the per-pair errors.
    """

    mae: float
    rmse: float
    corr: float
    stdev: float

    def __post_init__(self) -> None:
        if self.mae < 0.0 or self.stdev < 0.0:
            raise ValidationError("mae and stdev must be >= 0")
        # rmse >= mae up to float rounding in the equality case
        if self.rmse < self.mae - 1e-12:
            raise ValidationError(f"rmse {self.rmse} < mae {self.mae}")
        if not math.isnan(self.corr) and not -1.0 - 1e-12 <= self.corr <= 1.0 + 1e-12:
            raise ValidationError(f"corr {self.corr} outside [-1, 1]")
