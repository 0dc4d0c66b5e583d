#!/usr/bin/env python3
"""Regenerate the bundled car sprites (RGBA PNGs plus manifest.json).

The sprites are stylized but recognizably car-like: a rear view in three body
colors and a front (oncoming) view. Everything is drawn procedurally so the
assets are reproducible; rerun this script after changing the drawing code.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

REPO = Path(__file__).resolve().parents[1]
SPRITE_DIR = REPO / "src" / "smart" / "assets" / "sprites"

W, H = 120, 96
BODY_COLORS = {
    "red": (188, 32, 36),
    "blue": (42, 68, 186),
    "grey": (128, 128, 132),
}


def _canvas() -> np.ndarray:
    return np.zeros((H, W, 4), dtype=np.uint8)


def _fill(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, rgb: tuple, alpha: int = 255) -> None:
    img[y0:y1, x0:x1, :3] = rgb
    img[y0:y1, x0:x1, 3] = alpha


def _soften_edges(img: np.ndarray) -> None:
    """Feather the silhouette by halving alpha on boundary pixels."""
    alpha = img[:, :, 3]
    solid = alpha == 255
    inner = solid.copy()
    inner[1:-1, 1:-1] &= solid[:-2, 1:-1] & solid[2:, 1:-1] & solid[1:-1, :-2] & solid[1:-1, 2:]
    edge = solid & ~inner
    img[edge, 3] = 140


def _shade(rgb: tuple, factor: float) -> tuple:
    return tuple(min(255, max(0, round(c * factor))) for c in rgb)


def draw_rear_car(body: tuple) -> np.ndarray:
    """Rear view: trunk, cabin with window, wheels, brake lights."""
    img = _canvas()
    _fill(img, 8, 34, 112, 88, body)                      # body shell
    _fill(img, 8, 34, 112, 44, _shade(body, 1.18))        # roofline highlight
    _fill(img, 20, 10, 100, 34, _shade(body, 0.92))       # cabin
    _fill(img, 26, 14, 94, 30, (52, 66, 78))              # rear window
    _fill(img, 12, 62, 108, 66, _shade(body, 0.75))       # trunk seam
    _fill(img, 10, 70, 30, 80, (168, 24, 24))             # left brake light
    _fill(img, 90, 70, 110, 80, (168, 24, 24))            # right brake light
    _fill(img, 44, 72, 76, 82, (222, 222, 218))           # plate
    _fill(img, 14, 84, 34, 94, (22, 22, 24))              # left wheel
    _fill(img, 86, 84, 106, 94, (22, 22, 24))             # right wheel
    _fill(img, 34, 86, 86, 90, (30, 30, 34))              # shadow line
    _soften_edges(img)
    return img


def draw_front_car(body: tuple) -> np.ndarray:
    """Front view: windshield, grille, headlights."""
    img = _canvas()
    _fill(img, 8, 34, 112, 88, body)
    _fill(img, 8, 34, 112, 44, _shade(body, 1.18))
    _fill(img, 20, 10, 100, 34, _shade(body, 0.92))
    _fill(img, 26, 14, 94, 30, (120, 156, 176))           # windshield
    _fill(img, 10, 66, 32, 78, (236, 232, 178))           # left headlight
    _fill(img, 88, 66, 110, 78, (236, 232, 178))          # right headlight
    _fill(img, 40, 66, 80, 80, (40, 42, 46))              # grille
    _fill(img, 44, 70, 76, 72, (70, 72, 78))
    _fill(img, 44, 75, 76, 77, (70, 72, 78))
    _fill(img, 14, 84, 34, 94, (22, 22, 24))
    _fill(img, 86, 84, 106, 94, (22, 22, 24))
    _fill(img, 34, 86, 86, 90, (30, 30, 34))
    _soften_edges(img)
    return img


def main() -> int:
    SPRITE_DIR.mkdir(parents=True, exist_ok=True)
    entries = []
    sprites = {f"car-{name}": draw_rear_car(color) for name, color in BODY_COLORS.items()}
    sprites["car-oncoming"] = draw_front_car(BODY_COLORS["red"])
    for sprite_id, pixels in sprites.items():
        # keep a fully transparent 2 px border so composited edges stay soft
        assert not pixels[:2, :, 3].any() and not pixels[-2:, :, 3].any()
        assert not pixels[:, :2, 3].any() and not pixels[:, -2:, 3].any()
        file_name = f"{sprite_id}.png"
        Image.fromarray(pixels, mode="RGBA").save(SPRITE_DIR / file_name, format="PNG")
        entries.append({
            "id": sprite_id,
            "file": file_name,
            "anchor": [W // 2, H - 3],
            "native_width_px": W,
        })
    manifest = {"sprites": entries}
    (SPRITE_DIR / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(entries)} sprites to {SPRITE_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
