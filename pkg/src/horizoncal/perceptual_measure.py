"""Human sensitivity to calibration errors.

A study record pairs a ground-truth camera with a distorted one and stores
the share of viewers who picked the ground-truth composite.  A k-nearest
neighbor lookup over those records, in a 6-D space of parameter values and
errors scaled by how much error viewers tolerate, turns any (ground truth,
estimate) pair into a sensitivity score from 0 (unnoticeable) to 100
(always noticed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .camera_model import (
    CameraCalibration,
    ImageDims,
    world_to_camera,
    focal_px_from_vfov,
    project,
    unproject_to_ground,
    DEFAULT_CAMERA_HEIGHT,
)
from .errors import InvalidArgumentError, SchemaError

DEFAULT_K = 15

# Per-parameter tolerance: pitch in image units, roll and vfov in degrees.
# Layout of a query: (pitch value, pitch error, roll value, roll error, vfov value, vfov error).
QUERY_SCALE = np.array([0.2, 0.2, 12.0, 12.0, 15.0, 15.0])
QUERY_FIELDS = ("pitch_value", "pitch_error", "roll_value_deg", "roll_error_deg",
                "vfov_value_deg", "vfov_error_deg")

# Magnitude ranges (degrees) of the perturbations applied to the virtual camera.
DISTORTION_RANGES_DEG = {"pitch": (1.0, 30.0), "roll": (0.5, 20.0), "vfov": (5.0, 55.0)}
DISTORTED_PARAMS = ("pitch", "roll", "vfov")


@dataclass(frozen=True)
class StudyRecord:
    gt: CameraCalibration
    distorted: CameraCalibration
    pct_chose_gt: float
    n_votes: int = 1

    def __post_init__(self):
        if not (0.0 <= self.pct_chose_gt <= 100.0):
            raise SchemaError(f"pct_chose_gt must lie in [0, 100], got {self.pct_chose_gt!r}")
        if int(self.n_votes) != self.n_votes or self.n_votes < 1:
            raise SchemaError(f"n_votes must be a positive integer, got {self.n_votes!r}")

    def query(self) -> np.ndarray:
        return query_from_calibrations(self.gt, self.distorted)

    def to_dict(self) -> dict:
        return {
            "gt": self.gt.to_dict(),
            "distorted": self.distorted.to_dict(),
            "pct_chose_gt": float(self.pct_chose_gt),
            "n_votes": int(self.n_votes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StudyRecord":
        missing = [k for k in ("gt", "distorted", "pct_chose_gt", "n_votes") if k not in data]
        if missing:
            raise SchemaError(f"missing field(s) {missing}")
        try:
            gt = CameraCalibration.from_dict(data["gt"])
        except (InvalidArgumentError, TypeError) as exc:
            raise SchemaError(f"field 'gt': {exc}") from None
        try:
            distorted = CameraCalibration.from_dict(data["distorted"])
        except (InvalidArgumentError, TypeError) as exc:
            raise SchemaError(f"field 'distorted': {exc}") from None
        pct = data["pct_chose_gt"]
        if not isinstance(pct, (int, float)) or isinstance(pct, bool) or not 0 <= pct <= 100:
            raise SchemaError(f"field 'pct_chose_gt' must be a number in [0, 100], got {pct!r}")
        votes = data["n_votes"]
        if not isinstance(votes, int) or isinstance(votes, bool) or votes < 1:
            raise SchemaError(f"field 'n_votes' must be a positive integer, got {votes!r}")
        return cls(gt=gt, distorted=distorted, pct_chose_gt=float(pct), n_votes=votes)


def query_from_calibrations(gt: CameraCalibration, estimate: CameraCalibration) -> np.ndarray:
    """6-vector of parameter values and errors of ``estimate`` relative to ``gt``."""
    return np.array([
        gt.midpoint,
        estimate.midpoint - gt.midpoint,
        math.degrees(gt.roll),
        math.degrees(estimate.roll - gt.roll),
        math.degrees(gt.vfov),
        math.degrees(estimate.vfov - gt.vfov),
    ])


def sensitivity_from_pct(pct):
    """Map the 50..100% confusion-to-detection range onto 0..100 sensitivity."""
    p = np.asarray(pct, dtype=float)
    if not np.all((p >= 0) & (p <= 100)):
        raise InvalidArgumentError(f"percentage must lie in [0, 100], got {pct!r}")
    out = np.clip((p - 50.0) / 50.0 * 100.0, 0.0, 100.0)
    return float(out) if out.ndim == 0 else out


class SensitivityModel:
    """k-nearest-neighbor sensitivity function fitted on study records.

    Neighbors are found with the Euclidean distance after dividing each
    dimension by :data:`QUERY_SCALE`; ties at the k-th distance go to the
    record that appears first.  The neighbors' ``pct_chose_gt`` values are
    averaged with equal weight and then mapped with
    :func:`sensitivity_from_pct`.
    """

    def __init__(self, records: Sequence[StudyRecord], k: int = DEFAULT_K):
        records = list(records)
        if not records:
            raise InvalidArgumentError("at least one study record is required")
        if not 1 <= k <= len(records):
            raise InvalidArgumentError(f"k must lie in [1, {len(records)}], got {k}")
        self.k = k
        self.records = tuple(records)
        self._features = np.stack([r.query() for r in records]) / QUERY_SCALE
        self._pct = np.array([r.pct_chose_gt for r in records])

    @classmethod
    def from_arrays(cls, features, pct, k: int = DEFAULT_K) -> "SensitivityModel":
        """Build directly from raw (n, 6) query vectors and percentages."""
        features = np.asarray(features, dtype=float)
        pct = np.asarray(pct, dtype=float)
        if features.ndim != 2 or features.shape[1] != 6 or len(features) != len(pct) or len(pct) == 0:
            raise InvalidArgumentError("features must be (n, 6) with one percentage per row")
        if not 1 <= k <= len(pct):
            raise InvalidArgumentError(f"k must lie in [1, {len(pct)}], got {k}")
        if np.any((pct < 0) | (pct > 100)):
            raise InvalidArgumentError("percentages must lie in [0, 100]")
        self = cls.__new__(cls)
        self.k = k
        self.records = ()
        self._features = features / QUERY_SCALE
        self._pct = pct
        return self

    def __len__(self):
        return len(self._pct)

    def neighbors(self, queries, chunk: int = 256) -> np.ndarray:
        """Indices (m, k) of the nearest records for each query row."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if q.shape[1] != 6 or not np.all(np.isfinite(q)):
            raise InvalidArgumentError("queries must be finite 6-vectors")
        q = q / QUERY_SCALE
        out = np.empty((len(q), self.k), dtype=np.int64)
        cols = [np.ascontiguousarray(self._features[:, j]) for j in range(6)]
        for start in range(0, len(q), chunk):
            block = q[start:start + chunk]
            d2 = np.zeros((len(block), len(self._pct)))
            for j in range(6):
                d2 += (cols[j][None, :] - block[:, j, None]) ** 2
            order = np.argsort(d2, axis=1, kind="stable")
            out[start:start + chunk] = order[:, :self.k]
        return out

    def mean_pct(self, queries) -> np.ndarray:
        return self._pct[self.neighbors(queries)].mean(axis=1)

    def sensitivity(self, queries):
        """Sensitivity for one query (returns float) or many (returns array)."""
        single = np.asarray(queries).ndim == 1
        out = sensitivity_from_pct(self.mean_pct(queries))
        out = np.atleast_1d(out)
        return float(out[0]) if single else out

    def score(self, gt: CameraCalibration, estimate: CameraCalibration) -> float:
        return self.sensitivity(query_from_calibrations(gt, estimate))


def knn_sensitivity(query, records: Sequence[StudyRecord], k: int = DEFAULT_K) -> float:
    """Sensitivity of a single 6-vector query against ``records``."""
    return SensitivityModel(records, k).sensitivity(np.asarray(query, dtype=float))


@dataclass(frozen=True)
class DistortionSpec:
    """Signed perturbations in degrees; inactive components are exactly 0."""

    d_pitch: float = 0.0
    d_roll: float = 0.0
    d_vfov: float = 0.0
    active: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {
            "d_pitch_deg": self.d_pitch,
            "d_roll_deg": self.d_roll,
            "d_vfov_deg": self.d_vfov,
            "active": sorted(self.active),
        }


def sample_distortion(rng: np.random.Generator, active: Iterable[str]) -> DistortionSpec:
    """Perturbation with each active parameter shifted up or down by a uniform magnitude."""
    active = frozenset(active)
    if not active:
        raise InvalidArgumentError("at least one parameter must be distorted")
    unknown = active - set(DISTORTED_PARAMS)
    if unknown:
        raise InvalidArgumentError(f"unknown parameter(s) {sorted(unknown)}")
    values = {}
    for name in DISTORTED_PARAMS:
        if name in active:
            lo, hi = DISTORTION_RANGES_DEG[name]
            magnitude = rng.uniform(lo, hi)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            values[name] = sign * magnitude
        else:
            values[name] = 0.0
    return DistortionSpec(values["pitch"], values["roll"], values["vfov"], active)


def apply_distortion(gt: CameraCalibration, spec: DistortionSpec) -> CameraCalibration:
    """Ground-truth camera with pitch/roll/vfov angles shifted by ``spec``.

    Only distorted parameters change: without a pitch distortion the horizon
    midpoint stays where it was, otherwise it is recomputed from the shifted
    pitch angle under the distorted field of view and roll.

    Raises InvalidArgumentError when the result is not a valid camera (e.g.
    a negative field of view).
    """
    pitch = gt.pitch + math.radians(spec.d_pitch)
    roll = gt.roll + math.radians(spec.d_roll)
    vfov = gt.vfov + math.radians(spec.d_vfov)
    if not (0 < vfov < math.pi) or abs(pitch) >= math.pi / 2 or abs(roll) >= math.pi / 2:
        raise InvalidArgumentError("distortion leaves the valid camera range")
    if spec.d_pitch == 0.0:
        return CameraCalibration(vfov=vfov, midpoint=gt.midpoint, roll=roll)
    return CameraCalibration.from_angles(vfov, pitch, roll)


class Placement(NamedTuple):
    anchor_px: np.ndarray
    scale_factor: float


def height_for_pixel_height(anchor_px, pixel_height: float, calib: CameraCalibration,
                            dims: ImageDims, camera_height: float = DEFAULT_CAMERA_HEIGHT) -> float:
    """World height of a vertical segment standing at ``anchor_px`` that spans ``pixel_height`` px.

    The image of the segment's top point moves along a line as the height
    grows; its pixel distance from the base is
    ``f * H * |w| / (z0 * (z0 + H * vz))`` which is solved for ``H``.
    """
    base = unproject_to_ground(anchor_px, calib, dims, camera_height)
    m = world_to_camera(calib)
    p0 = m @ (base - np.array([0.0, camera_height, 0.0]))
    v = m @ np.array([0.0, 1.0, 0.0])
    f = focal_px_from_vfov(calib.vfov, dims)
    w = np.hypot(v[0] * p0[2] - p0[0] * v[2], v[1] * p0[2] - p0[1] * v[2])
    denom = f * w - pixel_height * p0[2] * v[2]
    if not denom > 0:
        raise InvalidArgumentError(
            f"a {pixel_height} px tall object cannot stand at {tuple(anchor_px)} under this camera"
        )
    return float(pixel_height * p0[2] ** 2 / denom)


def compensate_placement(gt: CameraCalibration, distorted: CameraCalibration, anchor_px,
                         apparent_height_px: float, dims: ImageDims,
                         camera_height: float = DEFAULT_CAMERA_HEIGHT) -> Placement:
    """Anchor and scale for rendering under ``distorted`` so the object matches the ground-truth render.

    The object keeps its anchor pixel (it is moved on the ground to wherever
    that pixel lands under the distorted camera) and is rescaled so its
    vertical extent covers the same number of pixels.
    """
    anchor = np.asarray(anchor_px, dtype=float)
    if not apparent_height_px > 0:
        raise InvalidArgumentError("apparent height must be positive")
    for cam in (gt, distorted):
        unproject_to_ground(anchor, cam, dims, camera_height)  # raises if unprojectable
    if gt == distorted:
        return Placement(anchor, 1.0)
    h_gt = height_for_pixel_height(anchor, apparent_height_px, gt, dims, camera_height)
    h_d = height_for_pixel_height(anchor, apparent_height_px, distorted, dims, camera_height)
    return Placement(anchor, h_d / h_gt)


def projected_height(anchor_px, world_height: float, calib: CameraCalibration, dims: ImageDims,
                     camera_height: float = DEFAULT_CAMERA_HEIGHT) -> float:
    """Pixel length of a vertical segment of ``world_height`` standing at ``anchor_px``."""
    base = unproject_to_ground(anchor_px, calib, dims, camera_height)
    top = base + np.array([0.0, world_height, 0.0])
    return float(np.linalg.norm(project(top, calib, dims, camera_height)
                                - project(base, calib, dims, camera_height)))


def load_study(path) -> list:
    """Read study records from a JSON-lines file; blank lines are ignored."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(data, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            try:
                records.append(StudyRecord.from_dict(data))
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return records


def save_study(records: Iterable[StudyRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def shipped_study_path() -> Path:
    """Path of the synthetic study records bundled with the package."""
    return Path(__file__).parent / "data" / "synthetic_study.jsonl"
