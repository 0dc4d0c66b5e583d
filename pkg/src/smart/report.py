"""Rendering: steering-angle heatmap, undesirable-degree heatmap, summary tables.

The colormaps are fixed 256-step tables defined numerically here (not pulled
from a plotting library) so identical reports always produce byte-identical
PNGs and each cell color decodes back to its value within quantization error.

Steering-angle map: index 0 = -1 (dark red, rightward) through light grey at 0
to index 255 = +1 (dark blue, leftward). Degree map: index 0 = 0 (white) to
index 255 = 1 (purple); its green channel is 255 - index, so it is injective
by construction.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core_types import SmartError
from .corpus import save_image
from .pipeline import RunReport, write_aggregates_csv

_SA_NEG = (165, 0, 38)  # steering angle -1 (rightward extreme)
_SA_MID = (247, 247, 247)  # steering angle 0
_SA_POS = (49, 54, 149)  # steering angle +1 (leftward extreme)
_UB_LO = (255, 255, 255)  # degree 0
_UB_HI = (128, 0, 128)  # degree 1

ERROR_CELL_COLOR = (160, 160, 160)
CURVED_OVERLAY_COLOR = (105, 105, 105)
SOURCE_HATCH_COLOR = (0, 150, 0)
HOTSPOT_COLOR = (255, 0, 0)


class EmptyReport(SmartError):
    """The report has no frames to render."""


class UnknownTheta(SmartError):
    """The requested threshold is not one the report was evaluated at."""


def _lerp(a: tuple, b: tuple, t: float) -> tuple[int, int, int]:
    return tuple(round(a[i] + (b[i] - a[i]) * t) for i in range(3))


def _build_sa_colormap() -> list[tuple[int, int, int]]:
    table = []
    for i in range(256):
        t = i / 255.0
        if t <= 0.5:
            table.append(_lerp(_SA_NEG, _SA_MID, t * 2.0))
        else:
            table.append(_lerp(_SA_MID, _SA_POS, (t - 0.5) * 2.0))
    return table


def _build_ub_colormap() -> list[tuple[int, int, int]]:
    table = []
    for i in range(256):
        t = i / 255.0
        r = round(_UB_LO[0] + (_UB_HI[0] - _UB_LO[0]) * t)
        b = round(_UB_LO[2] + (_UB_HI[2] - _UB_LO[2]) * t)
        table.append((r, 255 - i, b))
    return table


SA_COLORMAP = _build_sa_colormap()
UB_COLORMAP = _build_ub_colormap()
_SA_INVERSE = {rgb: i for i, rgb in enumerate(SA_COLORMAP)}
_UB_INVERSE = {rgb: i for i, rgb in enumerate(UB_COLORMAP)}


def sa_to_color(sa: float) -> tuple[int, int, int]:
    index = round((max(-1.0, min(1.0, sa)) + 1.0) / 2.0 * 255.0)
    return SA_COLORMAP[index]


def color_to_sa(rgb: tuple[int, int, int]) -> float:
    index = _SA_INVERSE[tuple(rgb)]
    return index / 255.0 * 2.0 - 1.0


def m_to_color(m: float) -> tuple[int, int, int]:
    index = round(max(0.0, min(1.0, m)) * 255.0)
    return UB_COLORMAP[index]


def color_to_m(rgb: tuple[int, int, int]) -> float:
    return _UB_INVERSE[tuple(rgb)] / 255.0


def _expand_cells(grid: np.ndarray, cell_w: int, cell_h: int) -> np.ndarray:
    return np.repeat(np.repeat(grid, cell_h, axis=0), cell_w, axis=1)


def _require_frames(report: RunReport) -> None:
    if not report.frame_ids:
        raise EmptyReport("report contains no frames")


def render_sa_heatmap(report: RunReport, out: Path | str, cell_w: int = 4, cell_h: int = 12) -> Path:
    """Raw steering angles: source row on top (green-hatched), configs below.

    x is trip time (frames in corpus order), color limits pinned to +/-1.
    """
    _require_frames(report)
    labels = [c.label for c in report.spec.configs]
    n_rows = 1 + len(labels)
    n_cols = len(report.frame_ids)
    grid = np.zeros((n_rows, n_cols, 3), dtype=np.uint8)
    for col, fid in enumerate(report.frame_ids):
        sa_s = report.source_sas.get(fid)
        grid[0, col] = sa_to_color(sa_s) if sa_s is not None else ERROR_CELL_COLOR
        for row, label in enumerate(labels, start=1):
            cell = report.cell(fid, label)
            grid[row, col] = sa_to_color(cell.sa_f) if cell.sa_f is not None else ERROR_CELL_COLOR
    pixels = _expand_cells(grid, cell_w, cell_h)
    ys, xs = np.mgrid[0:cell_h, 0 : n_cols * cell_w]
    hatch = (xs + ys) % 4 == 0
    pixels[0:cell_h][hatch] = SOURCE_HATCH_COLOR
    save_image(pixels, out)
    return Path(out)


def detect_hotspots(
    report: RunReport,
    theta: float,
    window: int = 50,
    density: float = 0.5,
) -> list[tuple[int, int]]:
    """Frame-index spans where a sliding window's mean verdict exceeds density.

    The per-frame signal is the mean of u over evaluable non-reference cells
    (0 for curved frames unless the report includes them); every window of
    `window` consecutive frames whose mean signal strictly exceeds `density`
    is flagged, and overlapping flagged windows merge into one span
    (inclusive indices into the report's frame order).
    """
    if theta not in report.thetas:
        raise UnknownTheta(f"theta {theta} not evaluated; have {list(report.thetas)}")
    reference_label = report.spec.reference.label
    labels = [c.label for c in report.spec.configs if c.label != reference_label]
    signal = []
    for fid in report.frame_ids:
        if not report.include_curved and report.masks.flags.get(fid, False):
            signal.append(0.0)
            continue
        us = [
            report.cell(fid, label).ub_by_theta[theta].u
            for label in labels
            if report.cell(fid, label).evaluable
        ]
        signal.append(sum(us) / len(us) if us else 0.0)
    n = len(signal)
    if n < window or window < 1:
        return []
    flagged = []
    running = sum(signal[:window])
    for start in range(0, n - window + 1):
        if start > 0:
            running += signal[start + window - 1] - signal[start - 1]
        if running / window > density:
            flagged.append((start, start + window - 1))
    spans: list[tuple[int, int]] = []
    for start, end in flagged:
        if spans and start <= spans[-1][1] + 1:
            spans[-1] = (spans[-1][0], max(spans[-1][1], end))
        else:
            spans.append((start, end))
    return spans


def render_ub_heatmap(
    report: RunReport,
    theta: float,
    out: Path | str,
    cell_w: int = 4,
    cell_h: int = 12,
    hotspots: Optional[Sequence[tuple[int, int]]] = None,
    hotspot_window: int = 50,
    hotspot_density: float = 0.5,
) -> Path:
    """Degree of undesirableness per cell, with curved frames greyed out.

    Cell intensity is the metric value m; theta picks which verdicts feed
    hotspot detection. Hotspot spans (auto-detected unless given) are drawn
    as red rectangles across the full config band.
    """
    _require_frames(report)
    if theta not in report.thetas:
        raise UnknownTheta(f"theta {theta} not evaluated; have {list(report.thetas)}")
    labels = [c.label for c in report.spec.configs]
    n_rows = len(labels)
    n_cols = len(report.frame_ids)
    grid = np.zeros((n_rows, n_cols, 3), dtype=np.uint8)
    for col, fid in enumerate(report.frame_ids):
        curved = report.masks.flags.get(fid, False)
        for row, label in enumerate(labels):
            if curved:
                grid[row, col] = CURVED_OVERLAY_COLOR
                continue
            cell = report.cell(fid, label)
            grid[row, col] = m_to_color(cell.m) if cell.m is not None else ERROR_CELL_COLOR
    pixels = _expand_cells(grid, cell_w, cell_h)
    if hotspots is None:
        hotspots = detect_hotspots(report, theta, hotspot_window, hotspot_density)
    height = pixels.shape[0]
    for start, end in hotspots:
        x0 = start * cell_w
        x1 = (end + 1) * cell_w - 1
        pixels[0, x0 : x1 + 1] = HOTSPOT_COLOR
        pixels[height - 1, x0 : x1 + 1] = HOTSPOT_COLOR
        pixels[:, x0] = HOTSPOT_COLOR
        pixels[:, x1] = HOTSPOT_COLOR
    save_image(pixels, out)
    return Path(out)


def _fmt_percent(rate: Optional[float]) -> str:
    return "-" if rate is None else f"{rate * 100.0:.1f}%"


def render_tables(report: RunReport) -> tuple[str, str]:
    """The aggregates as an aligned text table and as CSV (same content)."""
    _require_frames(report)
    theta_headers = [f"ub@{format(t, 'g')}" for t in report.thetas]
    headers = ["row", "kind", *theta_headers, "violation", "evaluable", "errors"]
    table_rows = [headers]
    for agg in report.aggregates:
        table_rows.append([
            agg.label,
            agg.kind,
            *[_fmt_percent(agg.rates[t]) for t in report.thetas],
            _fmt_percent(agg.violation_rate),
            str(agg.n_evaluable),
            str(agg.n_error),
        ])
    widths = [max(len(row[col]) for row in table_rows) for col in range(len(headers))]
    lines = []
    for i, row in enumerate(table_rows):
        lines.append("  ".join(value.ljust(widths[col]) for col, value in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * widths[col] for col in range(len(headers))))
    curved = sum(report.masks.flags.get(fid, False) for fid in report.frame_ids)
    scope = "all frames" if report.include_curved else "straight frames only"
    lines.append("")
    lines.append(
        f"frames: {len(report.frame_ids)} total, {curved} curved "
        f"(|ground-truth SA| > {format(report.curved_threshold, 'g')}); aggregates over {scope}"
    )
    if report.masks.note:
        lines.append(f"note: {report.masks.note}")
    if report.stats is not None:
        s = report.stats
        corr = "n/a" if s.corr != s.corr else f"{s.corr:.3f}"
        lines.append(f"source vs ground truth: MAE {s.mae:.3f}  RMSE {s.rmse:.3f}  CORR {corr}  STDEV {s.stdev:.3f}")
    text = "\n".join(lines) + "\n"

    buffer = io.StringIO()
    write_aggregates_csv(report, buffer)
    return text, buffer.getvalue()


def render_all(
    report: RunReport,
    out_dir: Path | str,
    thetas: Optional[Sequence[float]] = None,
    cell_w: int = 4,
    cell_h: int = 12,
    hotspot_window: int = 50,
    hotspot_density: float = 0.5,
) -> list[Path]:
    """Write every rendering artifact for a report into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [render_sa_heatmap(report, out / "heatmap_sa.png", cell_w, cell_h)]
    for theta in thetas if thetas is not None else report.thetas:
        name = f"heatmap_ub_{format(float(theta), 'g')}.png"
        written.append(
            render_ub_heatmap(
                report, float(theta), out / name, cell_w, cell_h,
                hotspot_window=hotspot_window, hotspot_density=hotspot_density,
            )
        )
    text, csv_text = render_tables(report)
    (out / "tables.txt").write_text(text)
    (out / "tables.csv").write_text(csv_text)
    written += [out / "tables.txt", out / "tables.csv"]
    return written
