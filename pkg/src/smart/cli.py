"""Command-line entry point: run sweeps, render reports, export follow-ups.

Exit codes: 0 = clean run; 1 = the run finished but some cells failed (the
report is still written); 2 = configuration or usage error. The environment
variable SMART_SCRATCH overrides the scratch directory used for journaling
and materialized images.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core_types import SmartError, ValidationError
from .corpus import CorpusError, load_corpus, load_geometry, save_image
from .pipeline import load_report, run_testing, save_report
from .report import UnknownTheta, render_all
from .smg import load_default_specs, load_smg_specs
from .sut import parse_descriptor, ClampPolicy
from .transform import SpriteLibrary, TransformContext, generate_mg


def bundled_sprite_dir() -> Path:
    return Path(str(resources.files("smart.assets").joinpath("sprites")))


def _parse_thetas(text: str) -> list[float]:
    try:
        thetas = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValidationError(f"cannot parse theta list {text!r}") from None
    if not thetas:
        raise ValidationError("at least one theta is required")
    return thetas


def _load_specs(args) -> list:
    specs = load_smg_specs(args.specs) if args.specs else load_default_specs()
    if args.smg == "all":
        return specs
    selected = [s for s in specs if s.name == args.smg]
    if not selected:
        raise ValidationError(f"no SMG named {args.smg!r}; have {[s.name for s in specs]}")
    return selected


def _make_context(args, corpus) -> TransformContext:
    sprites = SpriteLibrary.load(args.sprites if args.sprites else bundled_sprite_dir())
    geometry = load_geometry(args.corpus, corpus[0].width, corpus[0].height)
    return TransformContext(sprites=sprites, geometry=geometry, snow_seed=args.seed)


def _scratch_dir(out_dir: Path) -> Path:
    env = os.environ.get("SMART_SCRATCH")
    return Path(env) if env else out_dir / "scratch"


def cmd_run(args) -> int:
    corpus = load_corpus(args.corpus)
    specs = _load_specs(args)
    ctx = _make_context(args, corpus)
    options = {}
    if args.script:
        options["script"] = str(args.script)
    sut = parse_descriptor(args.sut, timeout_ms=args.timeout_ms, options=options)
    if args.clamp_policy == "reject":
        from dataclasses import replace

        sut = replace(sut, clamp_policy=ClampPolicy.REJECT)
    thetas = _parse_thetas(args.theta)
    out_dir = Path(args.out)
    scratch = _scratch_dir(out_dir)
    any_cell_errors = False
    for spec in specs:
        report = run_testing(
            spec,
            corpus,
            sut,
            thetas=thetas,
            kappa=args.kappa,
            ctx=ctx,
            scratch_dir=scratch,
            lanes=args.lanes,
            include_curved=args.include_curved,
            curved_threshold=args.curved_threshold,
            use_ground_truth_reference=args.use_gt_reference,
            seed=args.seed,
        )
        run_info = {
            "corpus": str(args.corpus),
            "lanes": args.lanes,
            "smg": spec.name,
            "specs_file": str(args.specs) if args.specs else "<bundled>",
        }
        target = save_report(report, out_dir / spec.name, run_info)
        errors = report.n_cell_errors
        any_cell_errors = any_cell_errors or errors > 0
        print(f"{spec.name}: {len(report.frame_ids)} frames, {len(spec.configs)} configs, "
              f"{errors} cell errors -> {target}")
    return 1 if any_cell_errors else 0


def cmd_render(args) -> int:
    report = load_report(args.report)
    thetas = _parse_thetas(args.theta) if args.theta else None
    if thetas:
        for theta in thetas:
            if theta not in report.thetas:
                raise UnknownTheta(f"theta {theta} not in report (has {list(report.thetas)})")
    out_dir = Path(args.out) if args.out else Path(args.report)
    written = render_all(
        report,
        out_dir,
        thetas=thetas,
        cell_w=args.cell_width,
        cell_h=args.cell_height,
        hotspot_window=args.hotspot_window,
        hotspot_density=args.hotspot_density,
    )
    for path in written:
        print(path)
    return 0


def _contact_sheet(tiles: list[list[np.ndarray]]) -> np.ndarray:
    tile_h, tile_w = tiles[0][0].shape[:2]
    rows = len(tiles)
    cols = max(len(row) for row in tiles)
    sheet = np.full((rows * tile_h, cols * tile_w, 3), 24, dtype=np.uint8)
    for r, row in enumerate(tiles):
        for c, tile in enumerate(row):
            sheet[r * tile_h : (r + 1) * tile_h, c * tile_w : (c + 1) * tile_w] = tile
    return sheet


def cmd_gen(args) -> int:
    corpus = load_corpus(args.corpus)
    specs = _load_specs(args)
    ctx = _make_context(args, corpus)
    out_dir = Path(args.out)
    failures = 0
    for spec in specs:
        spec_dir = out_dir / spec.name
        spec_dir.mkdir(parents=True, exist_ok=True)
        sheet_rows = []
        sheet_ids = {f.frame_id for f in corpus[: args.sheet_frames]}
        for config in spec.configs:
            row_tiles = []
            for frame in corpus:
                try:
                    follow_up = generate_mg(ctx, frame, config)
                except SmartError as exc:
                    print(f"{spec.name}/{config.label}: frame {frame.frame_id}: {exc}", file=sys.stderr)
                    failures += 1
                    continue
                save_image(follow_up, spec_dir / f"{frame.frame_id:06d}__{config.label}.png")
                if args.contact_sheet and frame.frame_id in sheet_ids:
                    row_tiles.append(follow_up)
            if args.contact_sheet and row_tiles:
                sheet_rows.append(row_tiles)
        if args.contact_sheet and sheet_rows:
            save_image(_contact_sheet(sheet_rows), spec_dir / "contact_sheet.png")
        print(f"{spec.name}: wrote follow-ups for {len(corpus)} frames x {len(spec.configs)} configs")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smart", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a sweep against a SUT and write report CSVs")
    run.add_argument("--corpus", required=True, help="directory of numbered PNG frames")
    run.add_argument("--specs", default=None, help="SMG spec JSON (default: bundled four sweeps)")
    run.add_argument("--smg", default="all", help="SMG name to run, or 'all'")
    run.add_argument("--sut", required=True, help="stub:NAME | proc:CMD | net:HOST:PORT")
    run.add_argument("--theta", default="0,0.02", help="comma-separated thresholds")
    run.add_argument("--kappa", type=float, default=0.12, help="per-group violation threshold")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--seed", type=int, default=0, help="seed for the snow layer")
    run.add_argument("--lanes", type=int, default=1, help="parallel SUT lanes over frame shards")
    run.add_argument("--include-curved", action="store_true", help="aggregate over curved frames too")
    run.add_argument("--curved-threshold", type=float, default=0.2)
    run.add_argument("--use-gt-reference", action="store_true",
                     help="use ground truth instead of the source prediction as the difference baseline")
    run.add_argument("--script", default=None, help="value table for stub:scripted")
    run.add_argument("--sprites", default=None, help="sprite asset directory (default: bundled)")
    run.add_argument("--timeout-ms", type=int, default=10_000)
    run.add_argument("--clamp-policy", choices=["clamp", "reject"], default="clamp")
    run.set_defaults(fn=cmd_run)

    render = sub.add_parser("render", help="render heatmaps and tables from a prior run")
    render.add_argument("--report", required=True, help="run output directory containing report.json")
    render.add_argument("--theta", default=None, help="thresholds to render (default: all in report)")
    render.add_argument("--out", default=None, help="where to write (default: the report directory)")
    render.add_argument("--cell-width", type=int, default=4)
    render.add_argument("--cell-height", type=int, default=12)
    render.add_argument("--hotspot-window", type=int, default=50)
    render.add_argument("--hotspot-density", type=float, default=0.5)
    render.set_defaults(fn=cmd_render)

    gen = sub.add_parser("gen", help="materialize follow-up images for manual inspection")
    gen.add_argument("--corpus", required=True)
    gen.add_argument("--specs", default=None)
    gen.add_argument("--smg", default="all")
    gen.add_argument("--out", default="gen-out")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--sprites", default=None)
    gen.add_argument("--contact-sheet", action="store_true", help="also write a tiled review sheet")
    gen.add_argument("--sheet-frames", type=int, default=24, help="frames per contact-sheet row")
    gen.set_defaults(fn=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SmartError, CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
