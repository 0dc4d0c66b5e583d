"""Follow-up image synthesis: sprite insertion and snow overlays.

All operations are pure functions of their inputs (plus an explicit seed), so
repeated generation of the same follow-up is bit-identical. Compositing is
standard alpha-over computed in float64 and rounded half-away-from-zero back
to 8-bit channels; insertion touches no pixel outside the scaled sprite's
bounding box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .core_types import MGConfig, MGKind, SmartError, SourceFrame


class OutOfBounds(SmartError):
    """The scaled sprite would not fit inside the image."""


class MissingSprite(SmartError):
    """No sprite with the requested id is loaded."""


class IntensityOutOfRange(SmartError):
    """Snow intensity must lie in [0, 1]."""


class AssetError(SmartError):
    """A sprite asset or its manifest is malformed."""


@dataclass(frozen=True, eq=False)
class Sprite:
    """An RGBA raster with a ground-contact anchor and a nominal on-road width.

    The alpha border must be fully transparent for at least one pixel on every
    side so composited edges stay soft.
    """

    sprite_id: str
    pixels: np.ndarray
    anchor: tuple[int, int]
    native_width_px: int

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 4 or px.dtype != np.uint8:
            raise AssetError(f"sprite {self.sprite_id!r}: pixels must be HxWx4 uint8")
        alpha = px[:, :, 3]
        if alpha[0, :].any() or alpha[-1, :].any() or alpha[:, 0].any() or alpha[:, -1].any():
            raise AssetError(f"sprite {self.sprite_id!r}: border row/column must be fully transparent")
        ax, ay = self.anchor
        h, w = px.shape[:2]
        if not (0 <= ax < w and 0 <= ay < h):
            raise AssetError(f"sprite {self.sprite_id!r}: anchor {self.anchor} outside raster {w}x{h}")
        if self.native_width_px <= 0:
            raise AssetError(f"sprite {self.sprite_id!r}: native_width_px must be > 0")

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        return int(self.pixels.shape[1]), int(self.pixels.shape[0])


class SpriteLibrary:
    """Sprites loaded from a directory of RGBA PNGs plus a JSON manifest.

    Manifest schema::

        {"sprites": [{"id": "car-red", "file": "car-red.png",
                      "anchor": [60, 86], "native_width_px": 120}, ...]}
    """

    def __init__(self, sprites: dict[str, Sprite]):
        self._sprites = dict(sprites)

    @classmethod
    def load(cls, directory: Path | str) -> "SpriteLibrary":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.is_file():
            raise AssetError(f"no sprite manifest at {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise AssetError(f"sprite manifest {manifest_path}: {exc}") from exc
        sprites: dict[str, Sprite] = {}
        for entry in manifest.get("sprites", []):
            sprite_id = entry["id"]
            png = directory / entry["file"]
            img = Image.open(png).convert("RGBA")
            sprites[sprite_id] = Sprite(
                sprite_id=sprite_id,
                pixels=np.asarray(img, dtype=np.uint8),
                anchor=(int(entry["anchor"][0]), int(entry["anchor"][1])),
                native_width_px=int(entry["native_width_px"]),
            )
        return cls(sprites)

    def get(self, sprite_id: str) -> Sprite:
        try:
            return self._sprites[sprite_id]
        except KeyError:
            raise MissingSprite(f"unknown sprite {sprite_id!r}; have {sorted(self._sprites)}") from None

    def ids(self) -> list[str]:
        return sorted(self._sprites)


ScalePolicy = Callable[[int], float]


def constant_scale(_offset: int) -> float:
    return 1.0


@dataclass(frozen=True)
class InsertionGeometry:
    """Maps a config's lateral offset to a concrete paste position and scale.

    center_anchor is where an offset of 0 places the sprite's anchor;
    px_per_offset converts declared offsets to actual pixel displacement;
    base_scale rescales sprites for small corpora; scale_policy may vary the
    scale with the offset (constant by default, matching same-distance sweeps).
    """

    center_anchor: tuple[int, int]
    px_per_offset: float = 1.0
    base_scale: float = 1.0
    scale_policy: ScalePolicy = constant_scale

    @classmethod
    def default_for(cls, width: int, height: int) -> "InsertionGeometry":
        """Road-surface anchor at mid-width, ~3/4 image height."""
        return cls(center_anchor=(width // 2, round(0.78 * height)))

    def scale_at(self, offset: int) -> float:
        return self.base_scale * self.scale_policy(offset)


def _round_half_away(values: np.ndarray) -> np.ndarray:
    """Round non-negative floats half-away-from-zero into uint8."""
    return np.floor(values + 0.5).astype(np.uint8)


def _scaled_sprite(sprite: Sprite, scale: float) -> tuple[np.ndarray, tuple[int, int]]:
    """Sprite raster and anchor after scaling; bilinear, skipped at scale 1."""
    w, h = sprite.size
    if scale <= 0:
        raise OutOfBounds(f"sprite {sprite.sprite_id!r}: scale {scale} must be > 0")
    target_w = max(1, round(w * scale))
    target_h = max(1, round(h * scale))
    if (target_w, target_h) == (w, h):
        return sprite.pixels, sprite.anchor
    img = Image.fromarray(sprite.pixels, mode="RGBA").resize((target_w, target_h), Image.BILINEAR)
    ax = min(target_w - 1, round(sprite.anchor[0] * target_w / w))
    ay = min(target_h - 1, round(sprite.anchor[1] * target_h / h))
    return np.asarray(img, dtype=np.uint8), (ax, ay)


def insert_object(
    image: np.ndarray,
    sprite: Sprite,
    geometry: InsertionGeometry,
    config: MGConfig,
) -> np.ndarray:
    """Alpha-over the (scaled) sprite onto a copy of the image.

    The sprite anchor lands at center_anchor shifted by the config's lateral
    offset; the whole scaled bounding box must lie inside the image.
    """
    h, w = image.shape[:2]
    offset = config.offset
    scale = geometry.scale_at(offset) * sprite.native_width_px / sprite.size[0]
    pixels, (ax, ay) = _scaled_sprite(sprite, scale)
    sh, sw = pixels.shape[:2]
    x0 = geometry.center_anchor[0] + round(offset * geometry.px_per_offset) - ax
    y0 = geometry.center_anchor[1] - ay
    if x0 < 0 or y0 < 0 or x0 + sw > w or y0 + sh > h:
        raise OutOfBounds(
            f"sprite {sprite.sprite_id!r} at offset {offset} spans "
            f"[{x0}:{x0 + sw}]x[{y0}:{y0 + sh}] outside {w}x{h} image"
        )
    out = image.copy()
    region = out[y0 : y0 + sh, x0 : x0 + sw].astype(np.float64)
    alpha = pixels[:, :, 3:4].astype(np.float64) / 255.0
    blended = pixels[:, :, :3].astype(np.float64) * alpha + region * (1.0 - alpha)
    out[y0 : y0 + sh, x0 : x0 + sw] = _round_half_away(blended)
    return out


# Snow layer tuning: uniform haze floor as a fraction of the requested
# intensity, fleck sparsity, and the blur that softens each fleck.
_SNOW_HAZE_FLOOR = 0.55
_SNOW_FLECK_QUANTILE = 0.985
_SNOW_FLECK_SIGMA = 0.8
_SNOW_FLECK_GAIN = 4.0


def apply_snow(image: np.ndarray, intensity: float, seed: int) -> np.ndarray:
    """Blend a seeded white snow layer (haze plus flecks) over the image.

    Deterministic in (image, intensity, seed); intensity 0 is the identity,
    and mean luminance is non-decreasing in intensity because every pixel is
    pulled toward white with opacity proportional to intensity.
    """
    if not 0.0 <= intensity <= 1.0:
        raise IntensityOutOfRange(f"snow intensity {intensity} outside [0, 1]")
    if intensity == 0.0:
        return image.copy()
    h, w = image.shape[:2]
    rng = np.random.default_rng(seed)
    noise = rng.random((h, w))
    flecks = gaussian_filter((noise > _SNOW_FLECK_QUANTILE).astype(np.float64), sigma=_SNOW_FLECK_SIGMA)
    flecks = np.clip(flecks * _SNOW_FLECK_GAIN, 0.0, 1.0)
    opacity = intensity * (_SNOW_HAZE_FLOOR + (1.0 - _SNOW_HAZE_FLOOR) * flecks)
    opacity = opacity[:, :, np.newaxis]
    blended = 255.0 * opacity + image.astype(np.float64) * (1.0 - opacity)
    return _round_half_away(blended)


@dataclass(frozen=True)
class TransformContext:
    """Everything generate_mg needs besides the frame: assets, geometry, seed."""

    sprites: SpriteLibrary
    geometry: InsertionGeometry
    snow_seed: int = 0


def generate_mg(ctx: TransformContext, source: SourceFrame, config: MGConfig) -> np.ndarray:
    """Produce the follow-up image for one configuration.

    Insertions dispatch straight to insert_object; the snow kind composites
    the car first and the weather second, so the inserted car is snowed on
    like the rest of the scene.
    """
    sprite = ctx.sprites.get(config.sprite_id)
    inserted = insert_object(source.image, sprite, ctx.geometry, config)
    if config.kind is MGKind.OBJECT_PLUS_SNOW:
        return apply_snow(inserted, config.snow_intensity, ctx.snow_seed)
    return inserted


def luminance(image: np.ndarray) -> np.ndarray:
    """Per-pixel luma (ITU-R 601 weights) as float64."""
    rgb = image.astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
