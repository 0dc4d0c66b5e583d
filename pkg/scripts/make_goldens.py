#!/usr/bin/env python3
"""Regenerate the checked-in golden rendering artifacts under tests/goldens/.

The fixture run is fully deterministic: a seeded 6-frame synthetic corpus,
the bundled SMG1 sweep, and the brightness-centroid stub. Rerun this script
only when the rendering or fixture generation intentionally changes, then
audit the new goldens by eye before committing them.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from smart.cli import bundled_sprite_dir  # noqa: E402
from smart.corpus import load_corpus, load_geometry, make_synthetic_corpus  # noqa: E402
from smart.pipeline import run_testing  # noqa: E402
from smart.report import render_sa_heatmap, render_tables, render_ub_heatmap  # noqa: E402
from smart.smg import load_default_specs  # noqa: E402
from smart.sut import SutDescriptor, SutKind  # noqa: E402
from smart.transform import SpriteLibrary, TransformContext  # noqa: E402

GOLDENS = REPO / "tests" / "goldens"


def main() -> int:
    GOLDENS.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        corpus_dir = make_synthetic_corpus(Path(tmp) / "corpus", n_frames=6, seed=3)
        corpus = load_corpus(corpus_dir)
        geometry = load_geometry(corpus_dir, corpus[0].width, corpus[0].height)
        ctx = TransformContext(sprites=SpriteLibrary.load(bundled_sprite_dir()), geometry=geometry, snow_seed=0)
        spec = next(s for s in load_default_specs() if s.name == "SMG1")
        sut = SutDescriptor(kind=SutKind.IN_PROCESS_STUB, target="brightness-centroid")
        report = run_testing(spec, corpus, sut, ctx=ctx)
    render_sa_heatmap(report, GOLDENS / "heatmap_sa.png")
    render_ub_heatmap(report, 0.02, GOLDENS / "heatmap_ub_0.02.png")
    text, csv_text = render_tables(report)
    (GOLDENS / "tables.txt").write_text(text)
    (GOLDENS / "tables.csv").write_text(csv_text)
    for path in sorted(GOLDENS.iterdir()):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
