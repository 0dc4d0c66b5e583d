"""Corpus ingestion and synthetic corpus generation.

A corpus directory holds 8-bit RGB PNG frames whose filename stems are
integer frame ids (e.g. ``000042.png``), an optional ``ground_truth.csv``
with columns ``frame_id,steering_angle``, and an optional ``geometry.json``
tuning the insertion geometry for this corpus' resolution.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .core_types import SmartError, SourceFrame, SteeringAngle, ValidationError
from .transform import InsertionGeometry


class CorpusError(SmartError):
    """The corpus directory is missing, empty, or inconsistent."""


def load_image(path: Path | str) -> np.ndarray:
    """Read a PNG as an HxWx3 uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(image: np.ndarray, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="RGB").save(path, format="PNG")


def _load_ground_truth(path: Path) -> dict[int, SteeringAngle]:
    table: dict[int, SteeringAngle] = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                table[int(row["frame_id"])] = SteeringAngle(float(row["steering_angle"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}: bad ground-truth row {row!r}: {exc}") from exc
    return table


def load_corpus(directory: Path | str) -> list[SourceFrame]:
    """Load all frames in ascending frame_id order; dimensions must be uniform."""
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"corpus directory {directory} does not exist")
    frames_by_id: dict[int, Path] = {}
    for png in directory.glob("*.png"):
        stem = png.stem
        if not stem.lstrip("-").isdigit():
            continue
        frame_id = int(stem)
        if frame_id in frames_by_id:
            raise CorpusError(f"duplicate frame_id {frame_id} in {directory}")
        frames_by_id[frame_id] = png
    if not frames_by_id:
        raise CorpusError(f"no numbered .png frames in {directory}")
    gt_path = directory / "ground_truth.csv"
    ground_truth = _load_ground_truth(gt_path) if gt_path.is_file() else {}
    frames: list[SourceFrame] = []
    shape: Optional[tuple] = None
    for frame_id in sorted(frames_by_id):
        image = load_image(frames_by_id[frame_id])
        if shape is None:
            shape = image.shape
        elif image.shape != shape:
            raise CorpusError(
                f"frame {frame_id} has shape {image.shape}, corpus started with {shape}"
            )
        frames.append(SourceFrame(frame_id=frame_id, image=image, ground_truth=ground_truth.get(frame_id)))
    return frames


def load_geometry(directory: Path | str, width: int, height: int) -> InsertionGeometry:
    """The corpus' geometry.json, or the resolution-derived default."""
    path = Path(directory) / "geometry.json"
    if not path.is_file():
        return InsertionGeometry.default_for(width, height)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: {exc}") from exc
    default = InsertionGeometry.default_for(width, height)
    anchor = doc.get("center_anchor")
    return InsertionGeometry(
        center_anchor=(int(anchor[0]), int(anchor[1])) if anchor else default.center_anchor,
        px_per_offset=float(doc.get("px_per_offset", default.px_per_offset)),
        base_scale=float(doc.get("scale", default.base_scale)),
    )


def corpus_digest(frames: Sequence[SourceFrame]) -> str:
    """Stable content hash over frame ids, pixels, and ground truth."""
    import hashlib

    digest = hashlib.sha256()
    for frame in frames:
        digest.update(str(frame.frame_id).encode())
        digest.update(frame.image.tobytes())
        gt = "" if frame.ground_truth is None else repr(frame.ground_truth.value)
        digest.update(gt.encode())
    return digest.hexdigest()


def synthetic_frame(frame_id: int, width: int = 64, height: int = 48, seed: int = 0) -> np.ndarray:
    """A deterministic road-like frame: grass, a road trapezoid, a dashed centerline.

    The per-frame wiggle makes consecutive frames differ without changing the
    overall layout, so centroid-style models see stable but non-constant input.
    """
    rng = np.random.default_rng(seed * 100_003 + frame_id)
    image = np.zeros((height, width, 3), dtype=np.uint8)
    image[:, :] = (58, 110, 52)  # grass
    horizon = height // 3
    image[:horizon, :] = (140, 170, 205)  # sky
    cx = width / 2 + rng.integers(-2, 3)
    for y in range(horizon, height):
        t = (y - horizon) / max(1, height - 1 - horizon)
        half = (0.08 + 0.42 * t) * width / 2
        x0 = max(0, int(cx - half))
        x1 = min(width, int(cx + half) + 1)
        image[y, x0:x1] = (90, 90, 94)  # asphalt
        if (y // 3) % 2 == 0:
            mid = min(width - 1, max(0, int(cx)))
            image[y, mid] = (210, 205, 90)  # dashed centerline
    noise = rng.integers(-6, 7, size=(height, width, 1))
    return np.clip(image.astype(np.int16) + noise, 0, 255).astype(np.uint8)


def make_synthetic_corpus(
    directory: Path | str,
    n_frames: int = 20,
    width: int = 64,
    height: int = 48,
    seed: int = 0,
    ground_truth: Optional[Sequence[float]] = None,
) -> Path:
    """Write a small deterministic corpus with geometry scaled for its size.

    The geometry maps the standard +/-400 px sweep into the frame and shrinks
    sprites accordingly, so the bundled position sweeps stay in bounds.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for frame_id in range(n_frames):
        save_image(synthetic_frame(frame_id, width, height, seed), directory / f"{frame_id:06d}.png")
    geometry = {
        "center_anchor": [width // 2, round(0.78 * height)],
        "px_per_offset": round(width * 0.30 / 400.0, 6),
        "scale": round(width * 0.18 / 120.0, 6),
    }
    (directory / "geometry.json").write_text(json.dumps(geometry, indent=2) + "\n")
    if ground_truth is not None:
        if len(ground_truth) != n_frames:
            raise ValidationError("ground_truth length must match n_frames")
        with (directory / "ground_truth.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame_id", "steering_angle"])
            for frame_id, sa in enumerate(ground_truth):
                writer.writerow([frame_id, repr(float(sa))])
    return directory
