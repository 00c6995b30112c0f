"""Synthetic stand-ins for data this package cannot ship.

Everything here is SYNTHETIC: procedural panoramas for exercising the crop
pipeline, and study records drawn from a hand-made sensitivity surface for
exercising the perceptual measure.  None of it reflects measured human
responses.
"""

from __future__ import annotations

import math

import numpy as np

from .camera_model import CameraCalibration
from .errors import InvalidArgumentError
from .panorama_sampler import SamplingConfig, sample_camera_params
from .perceptual_measure import (
    DISTORTED_PARAMS,
    StudyRecord,
    apply_distortion,
    query_from_calibrations,
    sample_distortion,
)


def pixel_latitudes(height: int) -> np.ndarray:
    """Latitude (radians) of each panorama row center."""
    return math.pi / 2 - (np.arange(height) + 0.5) / height * math.pi


def pixel_longitudes(width: int) -> np.ndarray:
    return (np.arange(width) + 0.5) / width * 2 * math.pi - math.pi


def latitude_panorama(height: int) -> np.ndarray:
    """Float panorama whose single channel is the latitude of each pixel."""
    return np.repeat(pixel_latitudes(height)[:, None], 2 * height, axis=1)


def longitude_panorama(height: int) -> np.ndarray:
    """Float panorama with channels (cos lon, sin lon); continuous across the seam."""
    lon = pixel_longitudes(2 * height)
    row = np.stack([np.cos(lon), np.sin(lon)], axis=-1)
    return np.repeat(row[None], height, axis=0)


def scene_panorama(height: int = 256, seed: int = 0) -> np.ndarray:
    """uint8 RGB panorama: graded sky, checkered ground and a skyline of boxes."""
    rng = np.random.default_rng(seed)
    width = 2 * height
    lat = pixel_latitudes(height)[:, None]
    lon = pixel_longitudes(width)[None, :]
    img = np.zeros((height, width, 3))

    tint = rng.uniform(0.7, 1.0, 3)
    sky = np.clip(0.55 + 0.45 * np.sin(np.clip(lat, 0, None)), 0, 1)
    img[:] = (sky[..., None] * np.array([0.45, 0.65, 1.0]) * tint)

    # ground plane checkerboard, 1 m tiles seen from 1.6 m
    below = lat < 0
    dist = 1.6 / np.tan(np.clip(-lat, 1e-3, None))
    gx = np.floor(dist * np.sin(lon))
    gz = np.floor(dist * np.cos(lon))
    checker = ((gx + gz) % 2 == 0)
    ground = np.where(checker[..., None], [0.35, 0.3, 0.25], [0.55, 0.5, 0.4])
    img = np.where(below[..., None], ground * rng.uniform(0.8, 1.0), img)

    n_boxes = rng.integers(4, 9)
    for _ in range(n_boxes):
        center = rng.uniform(-math.pi, math.pi)
        half_w = rng.uniform(0.05, 0.3)
        top = rng.uniform(0.05, 0.5)
        dlon = np.angle(np.exp(1j * (lon - center)))
        mask = (np.abs(dlon) < half_w) & (lat >= 0) & (lat < top)
        img[mask] = rng.uniform(0.2, 0.9, 3)
    return np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)


def synthetic_pct(query) -> np.ndarray:
    """Expected percentage choosing ground truth on the synthetic surface.

    Each error is divided by a tolerance (0.25 image units of pitch; 6 degrees
    of roll, widening for strongly rolled cameras; +20 / -60 degrees of field
    of view) and the quartic terms give a flat, unnoticed band around zero
    error that rises steeply beyond the tolerance.
    """
    q = np.atleast_2d(np.asarray(query, dtype=float))
    t_pitch = q[:, 1] / 0.25
    t_roll = q[:, 3] / (6.0 * (1.0 + np.abs(q[:, 2]) / 15.0))
    t_vfov = np.where(q[:, 5] > 0, q[:, 5] / 20.0, q[:, 5] / 60.0)
    detect = 1.0 - np.exp(-0.5 * (t_pitch ** 4 + t_roll ** 4 + t_vfov ** 4))
    out = 50.0 + 50.0 * detect
    return out[0] if np.asarray(query).ndim == 1 else out


def synthetic_study(n: int, seed: int = 0, n_votes: int = 11, vote_noise: bool = False,
                    config: SamplingConfig | None = None) -> list:
    """``n`` SYNTHETIC study records built from the sampler and :func:`synthetic_pct`.

    Each record distorts a random non-empty subset of pitch/roll/vfov.  With
    ``vote_noise`` the percentage is a binomial draw over ``n_votes`` viewers
    instead of the exact surface value.
    """
    if n < 0 or n_votes < 1:
        raise InvalidArgumentError("n must be >= 0 and n_votes >= 1")
    rng = np.random.default_rng(seed)
    config = config or SamplingConfig()
    records = []
    while len(records) < n:
        gt = sample_camera_params(rng, config).calibration
        mask = 0
        while mask == 0:
            mask = int(rng.integers(1, 8))
        active = [p for i, p in enumerate(DISTORTED_PARAMS) if mask & (1 << i)]
        spec = sample_distortion(rng, active)
        try:
            distorted = apply_distortion(gt, spec)
        except InvalidArgumentError:
            continue
        p = float(synthetic_pct(query_from_calibrations(gt, distorted)))
        if vote_noise:
            p = 100.0 * rng.binomial(n_votes, p / 100.0) / n_votes
        records.append(StudyRecord(gt=gt, distorted=distorted, pct_chose_gt=p, n_votes=n_votes))
    return records


def random_calibration(rng: np.random.Generator) -> CameraCalibration:
    """Calibration drawn broadly over the codec ranges (for tests and demos)."""
    return CameraCalibration(
        vfov=float(rng.uniform(0.2, 1.8)),
        midpoint=float(rng.uniform(-1.5, 1.5)),
        roll=float(rng.uniform(-1.2, 1.2)),
    )
