"""256-bin discretization of slope, offset and vertical field of view.

Each calibration parameter is turned into a classification target: the
value is one-hot encoded over a fixed set of bins, and a predicted
distribution is decoded back to a value.  Slope and offset bins are
equal-probability quantiles of a zero-mean normal truncated to the
parameter range, so they are narrow around 0 and widen toward the ends;
field-of-view bins are uniform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidArgumentError

N_BINS = 256
PARAM_KINDS = ("slope", "offset", "vfov")

PARAM_RANGES = {
    "slope": (-math.pi / 2, math.pi / 2),
    "offset": (-1.6, 1.6),
    "vfov": (0.2, 1.8),
}
# std-dev of the normal whose quantiles place the edges
BIN_SIGMA = {"slope": 0.5, "offset": 1.0}

KL_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class BinSpec:
    param_kind: str
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.shape != (N_BINS + 1,) or not np.all(np.diff(edges) > 0):
            raise InvalidArgumentError("bin edges must be 257 strictly increasing values")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def low(self) -> float:
        return float(self.edges[0])

    @property
    def high(self) -> float:
        return float(self.edges[-1])

    def bin_index(self, value: float) -> int:
        if not (self.low <= value <= self.high):
            raise InvalidArgumentError(
                f"{self.param_kind} value {value!r} outside [{self.low}, {self.high}]"
            )
        # side="right" sends values sitting on an interior edge to the upper bin
        return int(min(np.searchsorted(self.edges, value, side="right") - 1, N_BINS - 1))

    def to_dict(self) -> dict:
        return {
            "param": self.param_kind,
            "n_bins": N_BINS,
            "edges": [float(e) for e in self.edges],
            "centers": [float(c) for c in self.centers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "BinSpec":
        return cls(param_kind=data["param"], edges=np.asarray(data["edges"], dtype=float))


def _quantile_edges(low: float, high: float, sigma: float) -> np.ndarray:
    if not math.isclose(low, -high):
        raise InvalidArgumentError("quantile bins need a range symmetric about 0")
    # Lower half only, then mirrored: exact symmetry and no precision loss in the upper tail.
    p_low = ndtr(low / sigma)
    p = p_low + (0.5 - p_low) * np.arange(N_BINS // 2 + 1) / (N_BINS // 2)
    lower = sigma * ndtri(p)
    lower[0] = low
    lower[-1] = 0.0
    return np.concatenate([lower, -lower[-2::-1]])


def make_bins(param_kind: str) -> BinSpec:
    """Bin layout for ``"slope"``, ``"offset"`` or ``"vfov"``."""
    if param_kind not in PARAM_RANGES:
        raise InvalidArgumentError(f"unknown parameter {param_kind!r}; expected one of {PARAM_KINDS}")
    low, high = PARAM_RANGES[param_kind]
    if param_kind == "vfov":
        edges = np.linspace(low, high, N_BINS + 1)
    else:
        edges = _quantile_edges(low, high, BIN_SIGMA[param_kind])
    return BinSpec(param_kind, edges)


def encode(value: float, spec: BinSpec) -> np.ndarray:
    """One-hot label distribution for ``value``."""
    probs = np.zeros(N_BINS)
    probs[spec.bin_index(value)] = 1.0
    return probs


def _check_distribution(probs, atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.shape != (N_BINS,):
        raise InvalidArgumentError(f"distribution must have {N_BINS} entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidArgumentError("distribution entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > atol:
        raise InvalidArgumentError(f"distribution sums to {p.sum()!r}, not 1")
    return p


def decode(probs, spec: BinSpec, method: str = "expectation") -> float:
    """Value represented by a label distribution.

    ``method="expectation"`` returns the probability-weighted mean of the bin
    centers; ``method="argmax"`` returns the center of the most likely bin.
    """
    p = _check_distribution(probs)
    if method == "expectation":
        return float(p @ spec.centers)
    if method == "argmax":
        return float(spec.centers[int(np.argmax(p))])
    raise InvalidArgumentError(f"unknown decode method {method!r}")


def kl_loss(pred: Sequence, target: Sequence, atol: float = 1e-9) -> float:
    """Sum over heads of KL(target || pred).

    ``pred`` and ``target`` are (n_heads, 256) arrays, normally three heads
    ordered slope, offset, vfov.  Predictions are floored at 1e-12 before the
    log; target entries equal to zero contribute nothing.
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.ndim != 2 or pred.shape != target.shape:
        raise InvalidArgumentError(
            f"pred and target must both be (n_heads, {N_BINS}); got {pred.shape} and {target.shape}"
        )
    total = 0.0
    for p, t in zip(pred, target):
        p = _check_distribution(p, atol)
        t = _check_distribution(t, atol)
        nz = t > 0
        total += float(np.sum(t[nz] * (np.log(t[nz]) - np.log(np.maximum(p[nz], KL_EPS)))))
    return max(total, 0.0)


def encode_calibration(calib, specs=None) -> np.ndarray:
    """(3, 256) targets for slope, offset and vfov of a :class:`CameraCalibration`."""
    specs = specs or {k: make_bins(k) for k in PARAM_KINDS}
    values = {"slope": calib.roll, "offset": calib.offset, "vfov": calib.vfov}
    return np.stack([encode(values[k], specs[k]) for k in PARAM_KINDS])
