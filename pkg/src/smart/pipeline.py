"""Run a sweep over a corpus and reduce the results into a sealed report.

Per frame: the source prediction comes first, then one follow-up prediction
per config in spec order; differences are scored against the sweep's
reference config and thresholded per theta. Failed calls mark their cell and
the run continues. Calls are journaled into a content-addressed scratch
directory, so an interrupted run resumes without re-executing finished cells
and reproduces the uninterrupted report bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core_types import (
    MetricKind,
    ModelStats,
    SMGSpec,
    SmartError,
    SourceFrame,
    SteeringAngle,
    UBRecord,
    ValidationError,
)
from .corpus import corpus_digest, save_image
from .metrics import ViolationParams, determine_ub, model_stats, mr_violated
from .smg import TransformFailed, spec_from_json, spec_to_json
from .sut import SutDescriptor, SutError, SutSession, clamp_sa, open_session
from .transform import TransformContext, constant_scale, generate_mg

SOURCE_LABEL = "source"


class CorpusEmpty(SmartError):
    """The corpus has no frames."""


class AuditError(SmartError):
    """Stored aggregates disagree with a recount from the raw cells."""


class ReportFormatError(SmartError):
    """A serialized report directory is missing or corrupt."""


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (frame, config) execution."""

    frame_id: int
    config_label: str
    sa_f: Optional[float] = None
    error: Optional[str] = None
    ad: Optional[float] = None
    ub_by_theta: dict[float, UBRecord] = field(default_factory=dict)
    mr_violation: Optional[bool] = None
    latency_ms: Optional[float] = None

    @property
    def evaluable(self) -> bool:
        """True when the cell produced verdicts (needs its own SA, the source SA
        and the reference SA)."""
        return bool(self.ub_by_theta)

    @property
    def m(self) -> Optional[float]:
        if not self.ub_by_theta:
            return None
        return next(iter(self.ub_by_theta.values())).m


@dataclass(frozen=True)
class CurvedMask:
    """Per-frame curved flags derived from ground truth."""

    flags: dict[int, bool]
    threshold: float
    n_missing_gt: int

    @property
    def curved_fraction(self) -> float:
        if not self.flags:
            return 0.0
        return sum(self.flags.values()) / len(self.flags)

    @property
    def note(self) -> str:
        if self.n_missing_gt == 0:
            return ""
        return f"{self.n_missing_gt} frame(s) lack ground truth and were treated as straight"


@dataclass(frozen=True)
class AggregateRow:
    """One Table-style summary row: a config, a side rollup, or the whole sweep."""

    label: str
    kind: str  # "config" | "side" | "smg"
    rates: dict[float, Optional[float]]
    violation_rate: Optional[float]
    n_evaluable: int
    n_error: int


@dataclass
class RunReport:
    """The full result tensor plus everything needed to render and audit it."""

    spec: SMGSpec
    sut: SutDescriptor
    thetas: tuple[float, ...]
    kappa: float
    frame_ids: tuple[int, ...]
    cells: dict[tuple[int, str], CellResult]
    source_sas: dict[int, Optional[float]]
    source_errors: dict[int, str]
    masks: CurvedMask
    aggregates: list[AggregateRow]
    stats: Optional[ModelStats]
    include_curved: bool
    curved_threshold: float
    seed: int
    run_key: str

    def cell(self, frame_id: int, label: str) -> CellResult:
        return self.cells[(frame_id, label)]

    def iter_cells(self):
        for fid in self.frame_ids:
            for config in self.spec.configs:
                yield self.cells[(fid, config.label)]

    @property
    def n_cell_errors(self) -> int:
        source_failed = sum(1 for fid in self.frame_ids if self.source_sas.get(fid) is None)
        cell_failed = sum(1 for c in self.iter_cells() if c.error is not None)
        return source_failed + cell_failed


def mask_curved(corpus: Sequence[SourceFrame], threshold: float = 0.2) -> CurvedMask:
    """Flag frames whose |ground-truth SA| exceeds the threshold.

    Frames without ground truth are treated as straight; the mask carries a
    note so reports disclose the degradation.
    """
    flags: dict[int, bool] = {}
    missing = 0
    for frame in corpus:
        if frame.ground_truth is None:
            flags[frame.frame_id] = False
            missing += 1
        else:
            flags[frame.frame_id] = abs(frame.ground_truth.value) > threshold
    return CurvedMask(flags=flags, threshold=threshold, n_missing_gt=missing)


def _left_right(spec: SMGSpec) -> tuple[list[str], list[str]]:
    left = [c.label for c in spec.configs if c.lateral_offset_px is not None and c.lateral_offset_px < 0]
    right = [c.label for c in spec.configs if c.lateral_offset_px is not None and c.lateral_offset_px > 0]
    return left, right


def _mean_rate(rows: list[AggregateRow], theta: float) -> Optional[float]:
    values = [row.rates[theta] for row in rows if row.rates[theta] is not None]
    if not values:
        return None
    return sum(values) / len(values)


def _mean_violation(rows: list[AggregateRow]) -> Optional[float]:
    values = [row.violation_rate for row in rows if row.violation_rate is not None]
    if not values:
        return None
    return sum(values) / len(values)


def _rollup(label: str, kind: str, members: list[AggregateRow], thetas: Sequence[float]) -> AggregateRow:
    return AggregateRow(
        label=label,
        kind=kind,
        rates={theta: _mean_rate(members, theta) for theta in thetas},
        violation_rate=_mean_violation(members),
        n_evaluable=sum(r.n_evaluable for r in members),
        n_error=sum(r.n_error for r in members),
    )


def aggregate(
    spec: SMGSpec,
    frame_ids: Sequence[int],
    cells: dict[tuple[int, str], CellResult],
    masks: CurvedMask,
    thetas: Sequence[float],
    include_curved: bool = False,
) -> list[AggregateRow]:
    """Reduce cells into Table-style rows over straight-road frames.

    Per-config rate at theta = undesirable verdicts / evaluable cells, over
    frames that pass the mask. Side rollups are the unweighted mean of their
    member config rates; the sweep rollup averages every non-reference config.
    Error cells count in neither numerator nor denominator.
    """
    included = [fid for fid in frame_ids if include_curved or not masks.flags.get(fid, False)]
    config_rows: dict[str, AggregateRow] = {}
    for config in spec.configs:
        n_eval = 0
        n_error = 0
        n_ub = {theta: 0 for theta in thetas}
        n_mr_eval = 0
        n_mr = 0
        for fid in included:
            cell = cells[(fid, config.label)]
            if cell.evaluable:
                n_eval += 1
                for theta in thetas:
                    n_ub[theta] += cell.ub_by_theta[theta].u
            else:
                n_error += 1
            if cell.mr_violation is not None:
                n_mr_eval += 1
                n_mr += int(cell.mr_violation)
        config_rows[config.label] = AggregateRow(
            label=config.label,
            kind="config",
            rates={theta: (n_ub[theta] / n_eval if n_eval else None) for theta in thetas},
            violation_rate=(n_mr / n_mr_eval if n_mr_eval else None),
            n_evaluable=n_eval,
            n_error=n_error,
        )

    reference_label = spec.reference.label
    non_reference = [config_rows[c.label] for c in spec.configs if c.label != reference_label]
    left_labels, right_labels = _left_right(spec)

    rows: list[AggregateRow] = [_rollup(spec.name, "smg", non_reference, thetas)]
    for config in spec.configs:
        rows.append(config_rows[config.label])
        if left_labels and config.label == left_labels[-1]:
            rows.append(_rollup("left", "side", [config_rows[l] for l in left_labels], thetas))
        if right_labels and config.label == right_labels[-1]:
            rows.append(_rollup("right", "side", [config_rows[l] for l in right_labels], thetas))
    return rows


def audit_aggregates(report: RunReport) -> None:
    """Recount the aggregates from raw cells; raise AuditError on any drift."""
    recount = aggregate(
        report.spec, report.frame_ids, report.cells, report.masks, report.thetas, report.include_curved
    )
    if recount != report.aggregates:
        raise AuditError("stored aggregates do not match a recount from cells")


@dataclass(frozen=True)
class _CallRecord:
    sa: Optional[float]
    error: Optional[str]
    latency_ms: float


class _Journal:
    """Append-only JSONL cache of raw SUT calls keyed by (frame_id, label)."""

    def __init__(self, path: Optional[Path]):
        self._path = path
        self._entries: dict[tuple[int, str], _CallRecord] = {}
        self._lock = threading.Lock()
        self._fh = None
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            if path.exists():
                self._load(path)
            self._fh = path.open("a")

    def _load(self, path: Path) -> None:
        for raw in path.read_text().splitlines():
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
                key = (int(doc["frame_id"]), str(doc["label"]))
                self._entries[key] = _CallRecord(doc.get("sa"), doc.get("error"), float(doc.get("latency_ms", 0.0)))
            except (ValueError, KeyError, TypeError):
                continue  # tolerate a torn trailing line from a hard kill

    def get(self, frame_id: int, label: str) -> Optional[_CallRecord]:
        with self._lock:
            return self._entries.get((frame_id, label))

    def record(self, frame_id: int, label: str, record: _CallRecord) -> None:
        with self._lock:
            self._entries[(frame_id, label)] = record
            if self._fh is not None:
                doc = {"frame_id": frame_id, "label": label, "sa": record.sa,
                       "error": record.error, "latency_ms": record.latency_ms}
                self._fh.write(json.dumps(doc) + "\n")
                self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def _geometry_fingerprint(ctx: TransformContext) -> dict:
    geometry = ctx.geometry
    policy = geometry.scale_policy
    policy_name = "constant" if policy is constant_scale else getattr(policy, "__qualname__", repr(policy))
    return {
        "center_anchor": list(geometry.center_anchor),
        "px_per_offset": geometry.px_per_offset,
        "base_scale": geometry.base_scale,
        "scale_policy": policy_name,
        "snow_seed": ctx.snow_seed,
    }


def compute_run_key(spec: SMGSpec, corpus: Sequence[SourceFrame], sut: SutDescriptor, ctx: TransformContext) -> str:
    doc = {
        "spec": spec_to_json(spec),
        "corpus": corpus_digest(corpus),
        "sut": sut.to_json(),
        "geometry": _geometry_fingerprint(ctx),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:32]


class _Lane:
    """One worker: owns a session and executes its shard strictly in order."""

    def __init__(self, descriptor: SutDescriptor, journal: _Journal, image_dir: Optional[Path],
                 ctx: TransformContext, spec: SMGSpec):
        self._descriptor = descriptor
        self._journal = journal
        self._image_dir = image_dir
        self._ctx = ctx
        self._spec = spec
        self._session: Optional[SutSession] = None

    def open(self) -> None:
        self._session = open_session(self._descriptor)

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
            self._session = None

    def _materialize(self, image, frame_id: int, label: str) -> Optional[str]:
        if not self._session.needs_image_path:
            return None
        name = hashlib.sha256(f"{frame_id}:{label}".encode()).hexdigest()[:24] + ".png"
        path = self._image_dir / name
        if not path.exists():
            save_image(image, path)
        return str(path)

    def _call(self, image, frame_id: int, label: str) -> _CallRecord:
        cached = self._journal.get(frame_id, label)
        if cached is not None:
            return cached
        request_id = f"{frame_id}:{label}"
        started = time.perf_counter()
        try:
            raw = self._session.raw_predict(image, request_id, self._materialize(image, frame_id, label))
            sa = clamp_sa(raw, self._descriptor.clamp_policy, context=request_id)
            record = _CallRecord(sa=sa, error=None, latency_ms=(time.perf_counter() - started) * 1000.0)
        except SutError as exc:
            record = _CallRecord(sa=None, error=str(exc), latency_ms=(time.perf_counter() - started) * 1000.0)
        self._journal.record(frame_id, label, record)
        return record

    def run_shard(self, frames: Sequence[SourceFrame]) -> None:
        for frame in frames:
            source = self._call(frame.image, frame.frame_id, SOURCE_LABEL)
            if source.sa is None:
                continue  # follow-ups cannot be scored without the source SA
            for config in self._spec.configs:
                if self._journal.get(frame.frame_id, config.label) is not None:
                    continue
                try:
                    follow_up = generate_mg(self._ctx, frame, config)
                except SmartError as exc:
                    failure = TransformFailed(config.label, exc)
                    self._journal.record(
                        frame.frame_id, config.label,
                        _CallRecord(sa=None, error=f"transform: {failure}", latency_ms=0.0),
                    )
                    continue
                self._call(follow_up, frame.frame_id, config.label)


def _build_cells(
    spec: SMGSpec,
    corpus: Sequence[SourceFrame],
    journal: _Journal,
    thetas: Sequence[float],
    kappa: float,
    use_ground_truth_reference: bool,
) -> tuple[dict[tuple[int, str], CellResult], dict[int, Optional[float]], dict[int, str]]:
    params = ViolationParams(kappa=kappa)
    reference_label = spec.reference.label
    cells: dict[tuple[int, str], CellResult] = {}
    source_sas: dict[int, Optional[float]] = {}
    source_errors: dict[int, str] = {}
    for frame in corpus:
        fid = frame.frame_id
        source = journal.get(fid, SOURCE_LABEL)
        sa_s = source.sa if source is not None else None
        source_sas[fid] = sa_s
        if sa_s is None:
            source_errors[fid] = source.error if source is not None else "not executed"
        if use_ground_truth_reference:
            base = frame.ground_truth.value if frame.ground_truth is not None else None
            base_missing = "no ground-truth reference for this frame"
        else:
            base = sa_s
            base_missing = f"source unavailable: {source_errors.get(fid, 'not executed')}"
        ref_record = journal.get(fid, reference_label)
        ad_ref = None
        if ref_record is not None and ref_record.sa is not None and base is not None:
            ad_ref = ref_record.sa - base
        for config in spec.configs:
            record = journal.get(fid, config.label)
            if record is None:
                # never executed: the frame's source call failed, so skip-marked
                cells[(fid, config.label)] = CellResult(
                    frame_id=fid, config_label=config.label,
                    error=base_missing if base is None else None,
                )
                continue
            ad = None
            ub: dict[float, UBRecord] = {}
            violation = None
            if record.sa is not None:
                if sa_s is not None:
                    violation = mr_violated(SteeringAngle(sa_s), SteeringAngle(record.sa), params)
                if base is not None:
                    ad = record.sa - base
                    if ad_ref is not None:
                        ub = {theta: determine_ub(spec.metric_kind, ad, ad_ref, theta) for theta in thetas}
            cells[(fid, config.label)] = CellResult(
                frame_id=fid,
                config_label=config.label,
                sa_f=record.sa,
                error=record.error,
                ad=ad,
                ub_by_theta=ub,
                mr_violation=violation,
                latency_ms=record.latency_ms,
            )
    return cells, source_sas, source_errors


def run_testing(
    spec: SMGSpec,
    corpus: Sequence[SourceFrame],
    sut: SutDescriptor,
    thetas: Sequence[float] = (0.0, 0.02),
    kappa: float = 0.12,
    *,
    ctx: TransformContext,
    scratch_dir: Optional[Path | str] = None,
    lanes: int = 1,
    include_curved: bool = False,
    curved_threshold: float = 0.2,
    use_ground_truth_reference: bool = False,
    seed: int = 0,
) -> RunReport:
    """Execute the whole sweep over the corpus and seal a report.

    With a scratch_dir, every raw call is journaled under a key derived from
    the inputs; re-running after an interrupt resumes from the journal and the
    final report is identical to an uninterrupted run against the same
    deterministic SUT.
    """
    if not corpus:
        raise CorpusEmpty("corpus has no frames")
    if not thetas:
        raise ValidationError("at least one theta is required")
    for theta in thetas:
        if theta < 0:
            raise ValidationError(f"theta {theta} must be >= 0")
    frames = sorted(corpus, key=lambda f: f.frame_id)
    frame_ids = tuple(f.frame_id for f in frames)
    if len(set(frame_ids)) != len(frame_ids):
        raise ValidationError("frame ids must be unique within a corpus")

    run_key = compute_run_key(spec, frames, sut, ctx)
    tmp = None
    if scratch_dir is not None:
        run_scratch = Path(scratch_dir) / run_key
        journal = _Journal(run_scratch / "cells.jsonl")
        image_dir = run_scratch / "img"
    else:
        tmp = tempfile.TemporaryDirectory(prefix="smart-scratch-")
        journal = _Journal(None)
        image_dir = Path(tmp.name)

    lanes = max(1, min(lanes, len(frames)))
    lane_workers = [_Lane(sut, journal, image_dir, ctx, spec) for _ in range(lanes)]
    shards = [frames[i::lanes] for i in range(lanes)]
    try:
        for worker in lane_workers:
            worker.open()  # fail fast on an unreachable SUT, before any work
        if lanes == 1:
            lane_workers[0].run_shard(shards[0])
        else:
            with ThreadPoolExecutor(max_workers=lanes) as pool:
                futures = [pool.submit(w.run_shard, s) for w, s in zip(lane_workers, shards)]
                for future in futures:
                    future.result()
    finally:
        for worker in lane_workers:
            worker.close()
        journal.close()
        if tmp is not None:
            tmp.cleanup()

    cells, source_sas, source_errors = _build_cells(
        spec, frames, journal, thetas, kappa, use_ground_truth_reference
    )
    masks = mask_curved(frames, curved_threshold)
    aggregates = aggregate(spec, frame_ids, cells, masks, thetas, include_curved)
    pairs = [
        (source_sas[f.frame_id], f.ground_truth.value)
        for f in frames
        if f.ground_truth is not None and source_sas[f.frame_id] is not None
    ]
    stats = model_stats(pairs) if len(pairs) >= 2 else None
    report = RunReport(
        spec=spec,
        sut=sut,
        thetas=tuple(float(t) for t in thetas),
        kappa=float(kappa),
        frame_ids=frame_ids,
        cells=cells,
        source_sas=source_sas,
        source_errors=source_errors,
        masks=masks,
        aggregates=aggregates,
        stats=stats,
        include_curved=include_curved,
        curved_threshold=curved_threshold,
        seed=seed,
        run_key=run_key,
    )
    audit_aggregates(report)
    return report


# --- serialization ---------------------------------------------------------
#
# A report directory holds:
#   results.csv     one row per (frame, config) cell
#   aggregates.csv  Table-style rollups, percentages to one decimal
#   latency.csv     per-call latency log
#   report.json     full machine-readable report (for rendering)
#   manifest.json   provenance: inputs, flags, seeds, output hashes
#
# All writers are deterministic: fixed column orders, LF line endings,
# shortest-repr floats, no timestamps.


def _fmt_float(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _fmt_theta(theta: float) -> str:
    return format(float(theta), "g")


def _fmt_percent(rate: Optional[float]) -> str:
    return "" if rate is None else f"{rate * 100.0:.1f}%"


def write_results_csv(report: RunReport, path: Path) -> None:
    headers = ["frame_id", "config", "sa_s", "sa_f", "ad", "m"]
    headers += [f"u@{_fmt_theta(t)}" for t in report.thetas]
    headers += ["violation", "error"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        for cell in report.iter_cells():
            row = [
                cell.frame_id,
                cell.config_label,
                _fmt_float(report.source_sas.get(cell.frame_id)),
                _fmt_float(cell.sa_f),
                _fmt_float(cell.ad),
                _fmt_float(cell.m),
            ]
            for theta in report.thetas:
                record = cell.ub_by_theta.get(theta)
                row.append("" if record is None else record.u)
            row.append("" if cell.mr_violation is None else int(cell.mr_violation))
            row.append(cell.error or "")
            writer.writerow(row)


def write_aggregates_csv(report: RunReport, target) -> None:
    """Write the Table-style aggregates as CSV to a path or text buffer."""
    headers = ["row", "kind"]
    headers += [f"ub@{_fmt_theta(t)}" for t in report.thetas]
    headers += ["violation", "evaluable", "errors"]
    fh = target.open("w", newline="") if isinstance(target, Path) else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        for agg in report.aggregates:
            row = [agg.label, agg.kind]
            row += [_fmt_percent(agg.rates[t]) for t in report.thetas]
            row.append(_fmt_percent(agg.violation_rate))
            row += [agg.n_evaluable, agg.n_error]
            writer.writerow(row)
    finally:
        if isinstance(target, Path):
            fh.close()


def write_latency_csv(report: RunReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_id", "config", "ms"])
        for cell in report.iter_cells():
            if cell.latency_ms is not None:
                writer.writerow([cell.frame_id, cell.config_label, f"{cell.latency_ms:.3f}"])


def _aggregate_to_json(row: AggregateRow) -> dict:
    return {
        "label": row.label,
        "kind": row.kind,
        "rates": {_fmt_theta(t): r for t, r in row.rates.items()},
        "violation_rate": row.violation_rate,
        "n_evaluable": row.n_evaluable,
        "n_error": row.n_error,
    }


def _aggregate_from_json(doc: dict, thetas: Sequence[float]) -> AggregateRow:
    rates = {float(t): doc["rates"][_fmt_theta(t)] for t in thetas}
    return AggregateRow(
        label=doc["label"],
        kind=doc["kind"],
        rates=rates,
        violation_rate=doc["violation_rate"],
        n_evaluable=doc["n_evaluable"],
        n_error=doc["n_error"],
    )


def report_to_json(report: RunReport) -> dict:
    cells = []
    for cell in report.iter_cells():
        cells.append({
            "frame_id": cell.frame_id,
            "config": cell.config_label,
            "sa_f": cell.sa_f,
            "error": cell.error,
            "ad": cell.ad,
            "mr_violation": cell.mr_violation,
            "latency_ms": cell.latency_ms,
            "ub": {_fmt_theta(t): {"m": r.m, "u": r.u} for t, r in cell.ub_by_theta.items()},
        })
    stats = None
    if report.stats is not None:
        stats = {
            "mae": report.stats.mae,
            "rmse": report.stats.rmse,
            "corr": None if math.isnan(report.stats.corr) else report.stats.corr,
            "stdev": report.stats.stdev,
        }
    return {
        "spec": spec_to_json(report.spec),
        "sut": report.sut.to_json(),
        "thetas": list(report.thetas),
        "kappa": report.kappa,
        "seed": report.seed,
        "run_key": report.run_key,
        "include_curved": report.include_curved,
        "curved_threshold": report.curved_threshold,
        "frame_ids": list(report.frame_ids),
        "source": {
            str(fid): {"sa": report.source_sas.get(fid), "error": report.source_errors.get(fid)}
            for fid in report.frame_ids
        },
        "masks": {
            "flags": {str(fid): bool(report.masks.flags[fid]) for fid in report.frame_ids},
            "threshold": report.masks.threshold,
            "n_missing_gt": report.masks.n_missing_gt,
        },
        "cells": cells,
        "aggregates": [_aggregate_to_json(a) for a in report.aggregates],
        "stats": stats,
    }


def report_from_json(doc: dict) -> RunReport:
    from .sut import ClampPolicy, SutKind  # local import keeps module load light

    spec = spec_from_json(doc["spec"])
    sut_doc = doc["sut"]
    sut = SutDescriptor(
        kind=SutKind(sut_doc["kind"]),
        target=sut_doc["target"],
        timeout_ms=sut_doc["timeout_ms"],
        clamp_policy=ClampPolicy(sut_doc["clamp_policy"]),
        options=sut_doc.get("options", {}),
    )
    thetas = tuple(float(t) for t in doc["thetas"])
    metric = spec.metric_kind
    cells: dict[tuple[int, str], CellResult] = {}
    for raw in doc["cells"]:
        ub = {}
        for key, rec in raw["ub"].items():
            theta = float(key)
            ub[theta] = UBRecord(metric_kind=metric, m=rec["m"], theta=theta, u=rec["u"])
        cell = CellResult(
            frame_id=raw["frame_id"],
            config_label=raw["config"],
            sa_f=raw["sa_f"],
            error=raw["error"],
            ad=raw["ad"],
            ub_by_theta=ub,
            mr_violation=raw["mr_violation"],
            latency_ms=raw["latency_ms"],
        )
        cells[(cell.frame_id, cell.config_label)] = cell
    stats = None
    if doc["stats"] is not None:
        s = doc["stats"]
        corr = math.nan if s["corr"] is None else s["corr"]
        stats = ModelStats(mae=s["mae"], rmse=s["rmse"], corr=corr, stdev=s["stdev"])
    masks = CurvedMask(
        flags={int(fid): bool(flag) for fid, flag in doc["masks"]["flags"].items()},
        threshold=doc["masks"]["threshold"],
        n_missing_gt=doc["masks"]["n_missing_gt"],
    )
    return RunReport(
        spec=spec,
        sut=sut,
        thetas=thetas,
        kappa=doc["kappa"],
        frame_ids=tuple(doc["frame_ids"]),
        cells=cells,
        source_sas={int(k): v["sa"] for k, v in doc["source"].items()},
        source_errors={int(k): v["error"] for k, v in doc["source"].items() if v["error"] is not None},
        masks=masks,
        aggregates=[_aggregate_from_json(a, thetas) for a in doc["aggregates"]],
        stats=stats,
        include_curved=doc["include_curved"],
        curved_threshold=doc["curved_threshold"],
        seed=doc["seed"],
        run_key=doc["run_key"],
    )


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_report(report: RunReport, out_dir: Path | str, run_info: Optional[dict] = None) -> Path:
    """Audit the report, then write the CSVs, report.json, and manifest.json."""
    audit_aggregates(report)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(report, out / "results.csv")
    write_aggregates_csv(report, out / "aggregates.csv")
    write_latency_csv(report, out / "latency.csv")
    report_doc = report_to_json(report)
    (out / "report.json").write_text(json.dumps(report_doc, sort_keys=True, indent=1) + "\n")
    spec_json = json.dumps(spec_to_json(report.spec), sort_keys=True)
    manifest = {
        "tool": "smart-harness",
        "run_key": report.run_key,
        "spec": spec_to_json(report.spec),
        "spec_sha256": hashlib.sha256(spec_json.encode()).hexdigest(),
        "sut": report.sut.to_json(),
        "thetas": list(report.thetas),
        "kappa": report.kappa,
        "seed": report.seed,
        "include_curved": report.include_curved,
        "curved_threshold": report.curved_threshold,
        "n_frames": len(report.frame_ids),
        "outputs": {
            name: _sha256_file(out / name)
            for name in ("results.csv", "aggregates.csv", "report.json")
        },
    }
    if run_info:
        manifest["run"] = dict(sorted(run_info.items()))
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out


def load_report(report_dir: Path | str) -> RunReport:
    path = Path(report_dir) / "report.json"
    if not path.is_file():
        raise ReportFormatError(f"no report.json in {report_dir}")
    try:
        doc = json.loads(path.read_text())
        return report_from_json(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"{path}: {exc}") from exc
