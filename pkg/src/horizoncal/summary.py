"""Binned error statistics for calibration estimates.

Errors (estimate minus ground truth) are grouped by the ground-truth value
of each parameter and summarized by quartiles, plus an empirical CDF of the
absolute field-of-view error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .camera_model import CameraCalibration
from .errors import InvalidArgumentError

SUMMARY_PARAMS = ("midpoint", "roll", "vfov")


@dataclass(frozen=True)
class ErrorBin:
    param: str
    low: float
    high: float
    count: int
    q1: float
    median: float
    q3: float


@dataclass(frozen=True)
class ErrorSummary:
    bins: tuple  # ErrorBin, grouped by parameter
    cdf_abs_vfov_error: np.ndarray  # sorted distinct |error| values
    cdf_fraction: np.ndarray  # fraction of pairs with |error| <= value

    def for_param(self, param: str) -> list:
        return [b for b in self.bins if b.param == param]

    def bins_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["param", "bin_low", "bin_high", "count", "q1", "median", "q3"])
        for b in self.bins:
            writer.writerow([b.param, repr(b.low), repr(b.high), b.count, repr(b.q1), repr(b.median), repr(b.q3)])
        return buf.getvalue()

    def cdf_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["abs_vfov_error_rad", "fraction"])
        for e, f in zip(self.cdf_abs_vfov_error, self.cdf_fraction):
            writer.writerow([repr(float(e)), repr(float(f))])
        return buf.getvalue()


def _values(calib: CameraCalibration) -> dict:
    return {"midpoint": calib.midpoint, "roll": calib.roll, "vfov": calib.vfov}


def _binned_quartiles(param: str, truth: np.ndarray, err: np.ndarray, bin_count: int) -> list:
    lo, hi = float(truth.min()), float(truth.max())
    edges = np.linspace(lo, hi, bin_count + 1)
    if hi > lo:
        idx = np.clip(np.searchsorted(edges, truth, side="right") - 1, 0, bin_count - 1)
    else:
        idx = np.zeros(len(truth), dtype=np.int64)
    out = []
    for b in range(bin_count):
        e = err[idx == b]
        if len(e):
            q1, med, q3 = (float(v) for v in np.percentile(e, [25, 50, 75]))
        else:
            q1 = med = q3 = math.nan
        out.append(ErrorBin(param, float(edges[b]), float(edges[b + 1]), int(len(e)), q1, med, q3))
    return out


def summarize_errors(pairs: Sequence, bin_count: int = 10) -> ErrorSummary:
    """Quartiles of ``pred - gt`` per ground-truth bin, for midpoint, roll and vfov.

    Args:
        pairs: ``(gt, pred)`` CameraCalibration pairs.
        bin_count: Number of equal-width bins spanning the observed
            ground-truth range of each parameter.  Empty bins report NaN
            quartiles.
    """
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgumentError("at least one (gt, pred) pair is required")
    if bin_count < 1:
        raise InvalidArgumentError(f"bin_count must be >= 1, got {bin_count}")
    bins = []
    for param in SUMMARY_PARAMS:
        truth = np.array([_values(g)[param] for g, _ in pairs])
        err = np.array([_values(p)[param] - _values(g)[param] for g, p in pairs])
        bins.extend(_binned_quartiles(param, truth, err, bin_count))

    abs_err = np.sort(np.abs([p.vfov - g.vfov for g, p in pairs]))
    values, counts = np.unique(abs_err, return_counts=True)
    fraction = np.cumsum(counts) / len(abs_err)
    return ErrorSummary(bins=tuple(bins), cdf_abs_vfov_error=values, cdf_fraction=fraction)
