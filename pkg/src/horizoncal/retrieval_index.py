"""Image retrieval by horizon position.

Each image is keyed by where its horizon crosses the left and right image
borders (image units), and a query returns the images whose key is closest
in Euclidean distance.
"""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from .camera_model import CameraCalibration, HorizonFeature, ImageDims, horizon_edge_intersections
from .errors import InvalidArgumentError, SchemaError


class RetrievalIndex:
    """Immutable list of (image_id, HorizonFeature) with nearest-neighbor queries."""

    def __init__(self, ids: Iterable[str], features):
        ids = [str(i) for i in ids]
        feats = np.asarray(features, dtype=float).reshape(-1, 2)
        if len(ids) != len(feats):
            raise InvalidArgumentError("one feature per image id is required")
        seen = set()
        for i in ids:
            if i in seen:
                raise InvalidArgumentError(f"duplicate image_id {i!r}")
            seen.add(i)
        if not np.all(np.isfinite(feats)):
            raise InvalidArgumentError("horizon features must be finite")
        self._ids = tuple(ids)
        self._feats = feats
        self._feats.setflags(write=False)
        self._pos = {i: n for n, i in enumerate(ids)}
        # rank of each id in lexicographic order, used as the tie-breaker
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        self._id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))

    def __len__(self):
        return len(self._ids)

    @property
    def ids(self) -> tuple:
        return self._ids

    @property
    def features(self) -> np.ndarray:
        return self._feats

    def feature(self, image_id: str) -> HorizonFeature:
        try:
            y_left, y_right = self._feats[self._pos[image_id]]
        except KeyError:
            raise InvalidArgumentError(f"unknown image_id {image_id!r}") from None
        return HorizonFeature(float(y_left), float(y_right))

    def query(self, feature: HorizonFeature, top_k: int = 4) -> list:
        """``(image_id, distance)`` pairs, nearest first; ties broken by image id."""
        if top_k < 1:
            raise InvalidArgumentError(f"top_k must be >= 1, got {top_k}")
        if not self._ids:
            return []
        q = feature.as_array() if isinstance(feature, HorizonFeature) else np.asarray(feature, float)
        diff = self._feats - q
        dist = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
        if top_k < len(dist):
            # keep everything tied with the k-th distance so the id tie-break stays exact
            kth = np.partition(dist, top_k - 1)[top_k - 1]
            cand = np.flatnonzero(dist <= kth)
        else:
            cand = np.arange(len(dist))
        order = cand[np.lexsort((self._id_rank[cand], dist[cand]))][:top_k]
        return [(self._ids[i], float(dist[i])) for i in order]

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i, (yl, yr) in zip(self._ids, self._feats):
                fh.write(json.dumps({"image_id": i, "y_left": float(yl), "y_right": float(yr)}) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "RetrievalIndex":
        ids, feats = [], []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    ids.append(rec["image_id"])
                    feats.append((float(rec["y_left"]), float(rec["y_right"])))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise SchemaError(f"{path}:{lineno}: malformed index entry ({exc})") from None
        return cls(ids, np.array(feats, dtype=float).reshape(-1, 2))


def build_index(entries) -> RetrievalIndex:
    """Index from ``(image_id, CameraCalibration, ImageDims | aspect)`` triples or manifest records.

    Manifest records (anything with ``crop_id``, ``calibration`` and
    ``aspect_ratio``) are keyed by their crop id.
    """
    ids, feats = [], []
    for entry in entries:
        if hasattr(entry, "crop_id"):
            image_id, calib, dims = entry.crop_id, entry.calibration, entry.aspect_ratio
        else:
            image_id, calib, dims = entry
        if not isinstance(calib, CameraCalibration):
            raise InvalidArgumentError(f"entry {image_id!r} has no valid calibration")
        if not isinstance(dims, ImageDims):
            dims = ImageDims(width=float(dims), height=1.0) if dims >= 1 else ImageDims(1.0, 1.0 / dims)
        f = horizon_edge_intersections(calib, dims)
        ids.append(image_id)
        feats.append((f.y_left, f.y_right))
    return RetrievalIndex(ids, np.array(feats, dtype=float).reshape(-1, 2))


def query(index: RetrievalIndex, feature: HorizonFeature, top_k: int = 4) -> list:
    return index.query(feature, top_k)
