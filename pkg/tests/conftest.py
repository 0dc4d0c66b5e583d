from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from smart.cli import bundled_sprite_dir
from smart.core_types import MGConfig, MGKind, MetricKind, SMGSpec, SourceFrame, SteeringAngle
from smart.corpus import load_corpus, load_geometry, make_synthetic_corpus
from smart.transform import InsertionGeometry, Sprite, SpriteLibrary, TransformContext

FIXTURES = Path(__file__).parent / "fixtures"
GOLDENS = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def sprite_lib() -> SpriteLibrary:
    return SpriteLibrary.load(bundled_sprite_dir())


def make_test_sprite(
    width: int = 10,
    height: int = 8,
    color: tuple[int, int, int] = (200, 40, 40),
    alpha: int = 255,
    sprite_id: str = "test-sprite",
) -> Sprite:
    """An opaque-bodied rectangle with the mandatory transparent 1 px border."""
    pixels = np.zeros((height, width, 4), dtype=np.uint8)
    pixels[1:-1, 1:-1, :3] = color
    pixels[1:-1, 1:-1, 3] = alpha
    return Sprite(sprite_id=sprite_id, pixels=pixels, anchor=(width // 2, height - 2), native_width_px=width)


def single_insert_spec(
    label: str = "center",
    offset: int = 0,
    sprite_id: str = "car-red",
    metric: MetricKind = MetricKind.UNCHANGE,
) -> SMGSpec:
    config = MGConfig(kind=MGKind.OBJECT_INSERT, label=label, lateral_offset_px=offset, sprite_id=sprite_id)
    return SMGSpec(name="single", configs=(config,), reference_index=0, metric_kind=metric)


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory) -> Path:
    return make_synthetic_corpus(tmp_path_factory.mktemp("corpus"), n_frames=6, seed=3)


@pytest.fixture(scope="session")
def small_corpus(small_corpus_dir) -> list[SourceFrame]:
    return load_corpus(small_corpus_dir)


@pytest.fixture(scope="session")
def small_ctx(small_corpus_dir, small_corpus, sprite_lib) -> TransformContext:
    geometry = load_geometry(small_corpus_dir, small_corpus[0].width, small_corpus[0].height)
    return TransformContext(sprites=sprite_lib, geometry=geometry, snow_seed=0)


def write_fig1_fixture(directory: Path) -> tuple[Path, Path]:
    """A 1-frame corpus plus the scripted values from the motivating example:

    source 0.02, red car 0.02, blue car -0.09 (grey pinned equal to red so the
    third sweep config stays benign).
    """
    corpus_dir = make_synthetic_corpus(directory / "corpus", n_frames=1, seed=1)
    script = {
        "frames": {
            "0": {"source": 0.02, "car-red": 0.02, "car-blue": -0.09, "car-grey": 0.02}
        }
    }
    script_path = directory / "fig1.json"
    script_path.write_text(json.dumps(script, indent=2) + "\n")
    return corpus_dir, script_path


@pytest.fixture(scope="session")
def fig1_fixture(tmp_path_factory) -> tuple[Path, Path]:
    return write_fig1_fixture(tmp_path_factory.mktemp("fig1"))
