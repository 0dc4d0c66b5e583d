"""Sequential metamorphic group construction and spec-file loading.

SMG specs are data, not code: the bundled default file defines the four
standard sweeps (two position sweeps, a color sweep, and a car+snow sweep),
and users add new sweeps by writing a JSON file with the same schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core_types import MGConfig, MGKind, MetricKind, SMGSpec, SmartError, SourceFrame, ValidationError
from .transform import TransformContext, generate_mg


class ParseError(SmartError):
    """The spec file is not syntactically valid."""


class InvalidSpec(SmartError):
    """The spec file parsed but violates an SMG invariant."""


class TransformFailed(SmartError):
    """A follow-up image could not be generated; carries the failing label."""

    def __init__(self, label: str, cause: Exception):
        super().__init__(f"config {label!r}: {cause}")
        self.label = label
        self.cause = cause


@dataclass(frozen=True, eq=False)
class MetamorphicGroup:
    """One source/follow-up pair under a single configuration."""

    source: SourceFrame
    follow_up: np.ndarray
    config: MGConfig

    def __post_init__(self) -> None:
        if self.follow_up.shape != self.source.image.shape:
            raise ValidationError(
                f"follow-up shape {self.follow_up.shape} differs from source {self.source.image.shape}"
            )


@dataclass(frozen=True, eq=False)
class SMGInstance:
    """All groups of one spec applied to one source frame, in spec order."""

    spec: SMGSpec
    source: SourceFrame
    groups: tuple[MetamorphicGroup, ...]

    def __post_init__(self) -> None:
        if len(self.groups) != len(self.spec.configs):
            raise ValidationError(f"expected {len(self.spec.configs)} groups, got {len(self.groups)}")
        for group, config in zip(self.groups, self.spec.configs):
            if group.config is not config and group.config != config:
                raise ValidationError(f"group order mismatch at {config.label!r}")


def generate_smg(spec: SMGSpec, source: SourceFrame, ctx: TransformContext) -> SMGInstance:
    """Generate one follow-up per config, in declared order, deterministically."""
    groups = []
    for config in spec.configs:
        try:
            follow_up = generate_mg(ctx, source, config)
        except SmartError as exc:
            raise TransformFailed(config.label, exc) from exc
        groups.append(MetamorphicGroup(source=source, follow_up=follow_up, config=config))
    return SMGInstance(spec=spec, source=source, groups=tuple(groups))


_KIND_BY_NAME = {k.value: k for k in MGKind}
_METRIC_BY_NAME = {m.value: m for m in MetricKind}


def _parse_config(raw: dict, smg_name: str) -> MGConfig:
    try:
        kind = _KIND_BY_NAME[raw["kind"]]
    except KeyError:
        raise InvalidSpec(
            f"SMG {smg_name!r}: config kind {raw.get('kind')!r} not one of {sorted(_KIND_BY_NAME)}"
        ) from None
    try:
        return MGConfig(
            kind=kind,
            label=raw["label"],
            lateral_offset_px=raw.get("lateral_offset_px"),
            sprite_id=raw.get("sprite"),
            snow_intensity=raw.get("snow_intensity"),
        )
    except ValidationError as exc:
        raise InvalidSpec(f"SMG {smg_name!r}: {exc}") from exc


def _parse_spec(raw: dict) -> SMGSpec:
    name = raw.get("name")
    if not name:
        raise InvalidSpec("spec entry missing 'name'")
    configs = tuple(_parse_config(c, name) for c in raw.get("configs", []))
    if not configs:
        raise InvalidSpec(f"SMG {name!r}: configs must be non-empty")
    metric_name = raw.get("metric")
    if metric_name not in _METRIC_BY_NAME:
        raise InvalidSpec(f"SMG {name!r}: metric {metric_name!r} not one of {sorted(_METRIC_BY_NAME)}")
    reference = raw.get("reference")
    labels = [c.label for c in configs]
    if isinstance(reference, int):
        reference_index = reference
    elif reference in labels:
        reference_index = labels.index(reference)
    else:
        raise InvalidSpec(f"SMG {name!r}: reference {reference!r} matches no config label")
    try:
        return SMGSpec(
            name=name,
            configs=configs,
            reference_index=reference_index,
            metric_kind=_METRIC_BY_NAME[metric_name],
            description=raw.get("description", ""),
        )
    except ValidationError as exc:
        raise InvalidSpec(f"SMG {name!r}: {exc}") from exc


def spec_to_json(spec: SMGSpec) -> dict:
    """Serialize a spec back into the file schema (reference as an index)."""
    configs = []
    for c in spec.configs:
        entry: dict = {"kind": c.kind.value, "label": c.label, "sprite": c.sprite_id}
        if c.lateral_offset_px is not None:
            entry["lateral_offset_px"] = c.lateral_offset_px
        if c.snow_intensity is not None:
            entry["snow_intensity"] = c.snow_intensity
        configs.append(entry)
    return {
        "name": spec.name,
        "description": spec.description,
        "metric": spec.metric_kind.value,
        "reference": spec.reference_index,
        "configs": configs,
    }


def spec_from_json(raw: dict) -> SMGSpec:
    return _parse_spec(raw)


def parse_smg_specs(text: str) -> list[SMGSpec]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("smgs"), list):
        raise ParseError("top level must be an object with an 'smgs' list")
    specs = [_parse_spec(raw) for raw in doc["smgs"]]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InvalidSpec(f"duplicate SMG names in file: {sorted(n for n in names if names.count(n) > 1)}")
    return specs


def load_smg_specs(path: Path | str) -> list[SMGSpec]:
    """Load SMG specs from a JSON file, in file order."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no spec file at {path}")
    try:
        return parse_smg_specs(path.read_text())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_default_specs() -> list[SMGSpec]:
    """The bundled four-sweep default (position x2, color, car+snow)."""
    text = resources.files("smart.assets").joinpath("default_smgs.json").read_text()
    return parse_smg_specs(text)


def equal_partitions(lo: float, hi: float, n: int) -> list[float]:
    """Split [lo, hi] into n equally spaced values, endpoints included."""
    if n < 1:
        raise ValidationError(f"need at least 1 partition, got {n}")
    if n == 1:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def offset_label(offset: int) -> str:
    if offset < 0:
        return f"left-{-offset}"
    if offset > 0:
        return f"right-{offset}"
    return "center"


def position_sweep(
    name: str,
    sprite_id: str,
    offsets: Sequence[int],
    kind: MGKind = MGKind.OBJECT_INSERT,
    metric_kind: MetricKind = MetricKind.UNCHANGE,
    description: str = "",
) -> SMGSpec:
    """Build a lateral-position sweep with standard labels and a center reference."""
    configs = tuple(
        MGConfig(kind=kind, label=offset_label(o), lateral_offset_px=int(o), sprite_id=sprite_id)
        for o in offsets
    )
    labels = [c.label for c in configs]
    if "center" not in labels:
        raise ValidationError("position sweep needs a 0 offset to act as reference")
    return SMGSpec(
        name=name,
        configs=configs,
        reference_index=labels.index("center"),
        metric_kind=metric_kind,
        description=description,
    )
