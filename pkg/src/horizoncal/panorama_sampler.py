"""Labeled crop generation from equirectangular panoramas.

Camera parameters are drawn from fixed distributions (lognormal focal
length, normal horizon height, a two-component Cauchy mixture for roll,
a categorical aspect ratio and uniform yaw), converted to a
:class:`~horizoncal.camera_model.CameraCalibration`, and a rectified pinhole
view is resampled out of the panorama for each draw.

Panorama layout: a ``2H x H`` raster; column centers span longitude
[-pi, pi) left to right and row centers span latitude pi/2 .. -pi/2 top to
bottom.  Longitude 0 is the world -z direction and grows toward +x.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .camera_model import (
    DEGENERATE_COS,
    CameraCalibration,
    WORLD_TO_CAMERA_BASIS,
    rotation_from_angles,
)
from .errors import InvalidArgumentError
from .label_codec import PARAM_RANGES

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
MAX_ATTEMPTS = 10_000
MIN_PANO_HEIGHT = 8
PANO_SUFFIXES = (".png", ".jpg", ".jpeg")
MANIFEST_NAME = "manifest.jsonl"
DATASET_META_NAME = "dataset.json"


@dataclass
class SamplingConfig:
    """Distributions used to draw camera parameters.

    Focal length is ``loc + scale * exp(s * Z)`` millimeters with Z standard
    normal.  Roll is drawn from a Cauchy centered at 0 whose scale is picked
    from ``roll_cauchy_scales`` with ``roll_cauchy_weights``.
    """

    focal_mm_lognormal: tuple = (0.8, 14.0, 17.0)  # (s, loc, scale)
    horizon_normal: tuple = (0.046, 0.6)  # (mean, stddev), image units
    roll_cauchy_location: float = 0.0
    roll_cauchy_scales: tuple = (0.001, 0.1)
    roll_cauchy_weights: tuple = (1 / 3, 2 / 3)
    aspect_ratios: tuple = ((1, 1), (5, 4), (4, 3), (3, 2), (16, 9))
    aspect_probs: tuple = (0.1, 0.1, 0.6, 0.1, 0.1)
    crops_per_pano: int = 7
    out_size: int = 224
    sensor_height_mm: float = 24.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        s, _, scale = self.focal_mm_lognormal
        if s <= 0 or scale <= 0:
            raise InvalidArgumentError("lognormal shape and scale must be positive")
        if self.horizon_normal[1] <= 0:
            raise InvalidArgumentError("horizon stddev must be positive")
        if len(self.roll_cauchy_scales) != len(self.roll_cauchy_weights):
            raise InvalidArgumentError("one mixture weight per Cauchy scale is required")
        if any(g <= 0 for g in self.roll_cauchy_scales):
            raise InvalidArgumentError("Cauchy scales must be positive")
        if len(self.aspect_ratios) != len(self.aspect_probs):
            raise InvalidArgumentError("one probability per aspect ratio is required")
        for name, probs in (("roll_cauchy_weights", self.roll_cauchy_weights),
                            ("aspect_probs", self.aspect_probs)):
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"{name} must be nonnegative and sum to 1, got {probs}")
        if self.crops_per_pano < 1 or self.out_size < 1 or self.sensor_height_mm <= 0:
            raise InvalidArgumentError("crops_per_pano, out_size and sensor_height_mm must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aspect_ratios"] = [list(a) for a in self.aspect_ratios]
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            if k == "aspect_ratios":
                v = tuple(tuple(int(x) for x in a) for a in v)
            elif isinstance(v, list):
                v = tuple(v)
            kwargs[k] = v
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "SamplingConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class CameraSample:
    focal_mm: float
    midpoint: float
    roll: float
    aspect: tuple
    yaw: float
    vfov: float

    @property
    def aspect_ratio(self) -> float:
        return self.aspect[0] / self.aspect[1]

    @property
    def calibration(self) -> CameraCalibration:
        return CameraCalibration(vfov=self.vfov, midpoint=self.midpoint, roll=self.roll)


def focal_mm_to_vfov(focal_mm, sensor_height_mm=24.0):
    """Vertical field of view (radians) of a lens on a sensor of the given height."""
    f = np.asarray(focal_mm, dtype=float)
    if not np.all(f > 0) or not sensor_height_mm > 0:
        raise InvalidArgumentError("focal length and sensor height must be positive")
    out = 2.0 * np.arctan(sensor_height_mm / (2.0 * f))
    return float(out) if out.ndim == 0 else out


def draw_raw_params(rng: np.random.Generator, config: SamplingConfig, n: int) -> dict:
    """``n`` unfiltered draws from every sampling distribution, as arrays.

    The draw order per call is fixed: focal, horizon, roll component, roll,
    aspect index, yaw.
    """
    s, loc, scale = config.focal_mm_lognormal
    focal = loc + scale * np.exp(s * rng.standard_normal(n))
    midpoint = rng.normal(config.horizon_normal[0], config.horizon_normal[1], n)
    comp = rng.choice(len(config.roll_cauchy_scales), size=n, p=config.roll_cauchy_weights)
    roll = config.roll_cauchy_location + np.asarray(config.roll_cauchy_scales)[comp] * rng.standard_cauchy(n)
    aspect_idx = rng.choice(len(config.aspect_ratios), size=n, p=config.aspect_probs)
    yaw = rng.uniform(-math.pi, math.pi, n)
    return {
        "focal_mm": focal,
        "midpoint": midpoint,
        "roll_component": comp,
        "roll": roll,
        "aspect_index": aspect_idx,
        "yaw": yaw,
        "vfov": focal_mm_to_vfov(focal, config.sensor_height_mm),
    }


def in_codec_range(vfov, midpoint, roll) -> np.ndarray:
    """Mask of draws whose calibration every label head can represent."""
    vfov, midpoint, roll = (np.asarray(a, dtype=float) for a in (vfov, midpoint, roll))
    v_lo, v_hi = PARAM_RANGES["vfov"]
    o_lo, o_hi = PARAM_RANGES["offset"]
    cos_r = np.cos(roll)
    offset = midpoint * cos_r
    return (
        (vfov >= v_lo) & (vfov <= v_hi)
        & (np.abs(roll) < math.pi / 2) & (cos_r >= DEGENERATE_COS)
        & (offset >= o_lo) & (offset <= o_hi)
    )


def sample_camera_params(rng: np.random.Generator, config: SamplingConfig) -> CameraSample:
    """One camera draw, resampling until its calibration is inside the codec ranges."""
    for _ in range(MAX_ATTEMPTS):
        d = draw_raw_params(rng, config, 1)
        if in_codec_range(d["vfov"], d["midpoint"], d["roll"])[0]:
            return CameraSample(
                focal_mm=float(d["focal_mm"][0]),
                midpoint=float(d["midpoint"][0]),
                roll=float(d["roll"][0]),
                aspect=tuple(config.aspect_ratios[int(d["aspect_index"][0])]),
                yaw=float(d["yaw"][0]),
                vfov=float(d["vfov"][0]),
            )
    raise RuntimeError(f"no in-range camera parameters after {MAX_ATTEMPTS} attempts; check the config")


def sample_camera_batch(rng: np.random.Generator, config: SamplingConfig, n: int) -> dict:
    """``n`` in-range draws as arrays (vectorized rejection; stream differs from repeated single draws)."""
    out = {k: [] for k in ("focal_mm", "midpoint", "roll", "aspect_index", "yaw", "vfov")}
    have, attempts = 0, 0
    while have < n:
        if attempts >= MAX_ATTEMPTS:
            raise RuntimeError("rejection sampling did not converge; check the config")
        d = draw_raw_params(rng, config, max(n - have, 16))
        ok = in_codec_range(d["vfov"], d["midpoint"], d["roll"])
        for k in out:
            out[k].append(d[k][ok])
        have += int(ok.sum())
        attempts += 1
    return {k: np.concatenate(v)[:n] for k, v in out.items()}


def _check_pano(pano: np.ndarray) -> np.ndarray:
    pano = np.asarray(pano)
    if pano.ndim not in (2, 3) or pano.shape[0] < 2 or pano.shape[1] != 2 * pano.shape[0]:
        raise InvalidArgumentError(
            f"equirectangular panorama must be 2H x H, got shape {pano.shape}"
        )
    return pano


def bilinear_wrap(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear lookup at continuous pixel-index coordinates.

    Columns wrap around; rows are clamped to the first/last row.  Integer
    coordinates hit pixel centers exactly.
    """
    h, w = image.shape[:2]
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x)
    y0 = np.minimum(np.floor(y), h - 2)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.int64) % w
    x1 = (x0 + 1) % w
    y0 = y0.astype(np.int64)
    y1 = y0 + 1
    img = image.astype(np.float64, copy=False)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def crop_directions(yaw: float, pitch: float, roll: float, vfov: float,
                    aspect: float = 1.0, out_size: int = 224) -> np.ndarray:
    """World directions (out_size, out_size, 3) of the crop's pixel centers."""
    if not (0.0 < vfov < math.pi):
        raise InvalidArgumentError(f"vfov must lie in (0, pi), got {vfov!r}")
    if not aspect > 0 or out_size < 1:
        raise InvalidArgumentError("aspect and out_size must be positive")
    t = math.tan(vfov / 2.0)
    grid = ((np.arange(out_size) + 0.5) / out_size * 2.0 - 1.0) * t
    xs, ys = np.meshgrid(grid * aspect, grid)
    rays = np.stack([xs, ys, np.ones_like(xs)], axis=-1)
    to_cam = rotation_from_angles(pitch, roll, yaw) @ WORLD_TO_CAMERA_BASIS
    # row-vector form of to_cam.T @ ray
    return rays @ to_cam


def directions_to_pano_coords(dirs: np.ndarray, pano_shape) -> tuple[np.ndarray, np.ndarray]:
    h, w = pano_shape[:2]
    lon = np.arctan2(dirs[..., 0], -dirs[..., 2])
    lat = np.arctan2(dirs[..., 1], np.hypot(dirs[..., 0], dirs[..., 2]))
    x = (lon + math.pi) / (2 * math.pi) * w - 0.5
    y = (math.pi / 2 - lat) / math.pi * h - 0.5
    return x, y


def extract_crop(pano: np.ndarray, yaw: float, pitch: float, roll: float, vfov: float,
                 aspect: float = 1.0, out_size: int = 224) -> np.ndarray:
    """Rectified pinhole view of an equirectangular panorama.

    The virtual camera has vertical field of view ``vfov`` and a horizontal
    extent ``aspect`` times its vertical one; the result is squeezed into an
    ``out_size x out_size`` raster.  uint8 panoramas give uint8 crops, float
    panoramas give float64 crops.
    """
    pano = _check_pano(pano)
    dirs = crop_directions(yaw, pitch, roll, vfov, aspect, out_size)
    x, y = directions_to_pano_coords(dirs, pano.shape)
    out = bilinear_wrap(pano, x, y)
    if pano.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out


def split_for(pano_id: str, fractions: Sequence[float] = (0.8, 0.1, 0.1)) -> str:
    """Split assigned to a panorama; depends on its id only."""
    if len(fractions) != len(SPLITS) or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"split fractions must be 3 nonnegative values summing to 1, got {fractions}")
    digest = hashlib.sha256(pano_id.encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0 ** 64
    acc = 0.0
    for name, frac in zip(SPLITS, fractions):
        acc += frac
        if u < acc:
            return name
    return next(n for n, f in zip(reversed(SPLITS), reversed(fractions)) if f > 0)


@dataclass(frozen=True)
class CropRecord:
    pano_id: str
    crop_id: str
    image_path: str
    vfov_rad: float
    midpoint_units: float
    roll_rad: float
    yaw_rad: float
    aspect_w: int
    aspect_h: int
    split: str

    @property
    def calibration(self) -> CameraCalibration:
        return CameraCalibration(vfov=self.vfov_rad, midpoint=self.midpoint_units, roll=self.roll_rad)

    @property
    def aspect_ratio(self) -> float:
        return self.aspect_w / self.aspect_h

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class DatasetManifest:
    records: list = field(default_factory=list)
    seed: int | None = None
    config: SamplingConfig = field(default_factory=SamplingConfig)

    def __len__(self):
        return len(self.records)

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / MANIFEST_NAME
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")
        with open(out_dir / DATASET_META_NAME, "w") as fh:
            json.dump({"seed": self.seed, "config": self.config.to_dict()}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def splits(self) -> dict:
        by_split = {s: set() for s in SPLITS}
        for rec in self.records:
            by_split[rec.split].add(rec.pano_id)
        return by_split


def read_manifest_records(path) -> list:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(CropRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise InvalidArgumentError(f"{path}:{lineno}: malformed manifest record ({exc})") from None
    return records


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Load a manifest written by :meth:`DatasetManifest.write` (file or directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    records = read_manifest_records(path)
    meta_path = path.parent / DATASET_META_NAME
    seed, config = None, SamplingConfig()
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        seed = meta.get("seed")
        config = SamplingConfig.from_dict(meta.get("config", {}))
    if check_files:
        missing = [r.image_path for r in records if not (path.parent / r.image_path).exists()]
        if missing:
            raise InvalidArgumentError(f"{len(missing)} manifest images are missing, e.g. {missing[0]}")
    return DatasetManifest(records=records, seed=seed, config=config)


def _load_pano(path: Path):
    try:
        with Image.open(path) as im:
            pano = np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError) as exc:
        logger.warning("skipping unreadable panorama %s: %s", path, exc)
        return None
    h, w = pano.shape[:2]
    if h < MIN_PANO_HEIGHT or w != 2 * h:
        logger.warning("skipping %s: expected a 2:1 panorama at least %d px high, got %dx%d",
                       path, MIN_PANO_HEIGHT, w, h)
        return None
    return pano


def list_panoramas(pano_dir) -> list:
    pano_dir = Path(pano_dir)
    if not pano_dir.is_dir():
        raise InvalidArgumentError(f"{pano_dir} is not a directory")
    return sorted(p for p in pano_dir.iterdir() if p.suffix.lower() in PANO_SUFFIXES and p.is_file())


def build_dataset(pano_dir, out_dir, config: SamplingConfig | None = None, seed: int = 0,
                  split_fractions: Sequence[float] = (0.8, 0.1, 0.1),
                  workers: int = 1) -> DatasetManifest:
    """Extract ``config.crops_per_pano`` labeled crops from every panorama in ``pano_dir``.

    Panoramas are visited in file-name order and all parameters come from a
    single generator seeded with ``seed``, so the manifest is reproducible.
    Crops are written as PNG under ``out_dir/crops`` and the manifest as
    ``out_dir/manifest.jsonl``.
    """
    config = config or SamplingConfig()
    paths = list_panoramas(pano_dir)
    if not paths:
        raise InvalidArgumentError(f"no panoramas ({', '.join(PANO_SUFFIXES)}) found in {pano_dir}")
    out_dir = Path(out_dir)
    crop_dir = out_dir / "crops"
    crop_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = DatasetManifest(seed=seed, config=config)

    def render(job):
        pano, sample, image_path = job
        crop = extract_crop(pano, sample.yaw, sample.calibration.pitch, sample.roll,
                            sample.vfov, sample.aspect_ratio, config.out_size)
        Image.fromarray(crop).save(out_dir / image_path, format="PNG")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for path in paths:
            pano = _load_pano(path)
            if pano is None:
                continue
            pano_id = path.stem
            split = split_for(pano_id, split_fractions)
            jobs = []
            for i in range(config.crops_per_pano):
                sample = sample_camera_params(rng, config)
                crop_id = f"{pano_id}_{i:03d}"
                image_path = f"crops/{crop_id}.png"
                jobs.append((pano, sample, image_path))
                manifest.records.append(CropRecord(
                    pano_id=pano_id, crop_id=crop_id, image_path=image_path,
                    vfov_rad=sample.vfov, midpoint_units=sample.midpoint, roll_rad=sample.roll,
                    yaw_rad=sample.yaw, aspect_w=int(sample.aspect[0]), aspect_h=int(sample.aspect[1]),
                    split=split,
                ))
            list(pool.map(render, jobs))
    if not manifest.records:
        raise InvalidArgumentError(f"no readable panoramas in {pano_dir}")
    manifest.write(out_dir)
    return manifest


def default_config_path() -> str | None:
    return os.environ.get("HORIZONCAL_CONFIG")
