"""Angle differences, deviation metrics, verdicts, and corpus statistics.

The three deviation metrics map a (difference, reference-difference) pair from
[-2, 2]^2 into [0, 1]; the 1/4 factor is exactly the normalization that makes
the extreme pair (2, -2) score 1. The directional metrics partition the
unchange metric: rightward(a, b) + leftward(a, b) == unchange(a, b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_types import MetricKind, ModelStats, SmartError, SteeringAngle, UBRecord, ValidationError


class InsufficientData(SmartError):
    """Too few pairs to compute corpus statistics."""


class DegenerateVariance(SmartError):
    """Pearson correlation is undefined because a series is constant."""


@dataclass(frozen=True)
class ViolationParams:
    """Classic per-group violation threshold on the absolute angle difference."""

    kappa: float = 0.12

    def __post_init__(self) -> None:
        if self.kappa < 0.0:
            raise ValidationError(f"kappa {self.kappa} must be >= 0")


def angle_difference(sa_f: SteeringAngle, sa_s: SteeringAngle) -> float:
    """Follow-up minus source steering angle, in [-2, 2]."""
    return sa_f.value - sa_s.value


def metric_unchange(ad: float, ad_ref: float) -> float:
    """Degree of any steering change relative to the reference difference."""
    return abs(ad - ad_ref) / 4.0


def metric_rightward(ad: float, ad_ref: float) -> float:
    """Degree of rightward (clockwise) deviation; zero when the change is leftward."""
    if ad < ad_ref:
        return abs(ad - ad_ref) / 4.0
    return 0.0


def metric_leftward(ad: float, ad_ref: float) -> float:
    """Degree of leftward (anticlockwise) deviation; zero when the change is rightward."""
    if ad > ad_ref:
        return abs(ad - ad_ref) / 4.0
    return 0.0


_METRIC_FNS = {
    MetricKind.UNCHANGE: metric_unchange,
    MetricKind.RIGHTWARD: metric_rightward,
    MetricKind.LEFTWARD: metric_leftward,
}


def compute_metric(metric_kind: MetricKind, ad: float, ad_ref: float) -> float:
    return _METRIC_FNS[metric_kind](ad, ad_ref)


def determine_ub(metric_kind: MetricKind, ad: float, ad_ref: float, theta: float) -> UBRecord:
    """Score the deviation and apply the strict threshold verdict (u = 1 iff m > theta)."""
    if theta < 0.0:
        raise ValidationError(f"theta {theta} must be >= 0")
    m = compute_metric(metric_kind, ad, ad_ref)
    return UBRecord(metric_kind=metric_kind, m=m, theta=theta, u=int(m > theta))


def mr_violated(sa_s: SteeringAngle, sa_f: SteeringAngle, params: ViolationParams) -> bool:
    """Classic single-group check: |follow-up - source| exceeds kappa."""
    return abs(sa_f.value - sa_s.value) > params.kappa


def pearson_corr(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation coefficient.

    Raises DegenerateVariance when either series is constant, in which case
    the coefficient has no defined value.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("series must be 1-d and equally long")
    if x.size < 2:
        raise InsufficientData(f"need at least 2 points, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("a constant series has no defined correlation")
    return float(np.sum(dx * dy) / (sx * sy))


def model_stats(pairs: Sequence[tuple[float, float]]) -> ModelStats:
    """MAE, RMSE, Pearson correlation, and error standard deviation over angle pairs.

    Each pair is (prediction, reference). The correlation is reported as NaN,
    not 0, when either series is constant; stdev is the population standard
    deviation of prediction - reference.
    """
    if len(pairs) < 2:
        raise InsufficientData(f"need at least 2 pairs, got {len(pairs)}")
    p = np.asarray([a for a, _ in pairs], dtype=np.float64)
    r = np.asarray([b for _, b in pairs], dtype=np.float64)
    err = p - r
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))
    stdev = float(np.std(err))
    try:
        corr = pearson_corr(p, r)
    except DegenerateVariance:
        corr = math.nan
    return ModelStats(mae=mae, rmse=rmse, corr=corr, stdev=stdev)
