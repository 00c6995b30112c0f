"""Closed-form geometry of the simplified pinhole camera.

Conventions used throughout the package:

World frame (right-handed)
    +x to the right of a level camera, +y up, +z pointing back toward the
    viewer. A level, un-yawed camera looks along -z. The ground is the plane
    y = 0 and the camera sits at (0, camera_height, 0).

Camera frame
    The usual computer-vision frame: +x right, +y down, +z forward.  The
    fixed change of basis from world-aligned axes to this frame is
    ``diag(1, -1, -1)``; the pitch/roll/yaw rotation is applied on top of it.

Angles
    * pitch > 0 tilts the camera down, which moves the horizon *above* the
      image center (positive midpoint).
    * roll > 0 turns the camera counter-clockwise about its optical axis (as
      seen from behind the camera); the image content, including the horizon,
      turns clockwise, so the horizon's left end is higher than its right end.
    * yaw > 0 turns the camera counter-clockwise seen from above (right-hand
      rule about +y), i.e. to the left.

Image units
    Vertical coordinate scaled so the top edge is +1 and the bottom edge is
    -1 (image half-height = 1).  Horizontal coordinates use the same scale, so
    the left/right edges sit at -w/h and +w/h.

Pixels
    Continuous coordinates with (0, 0) at the top-left corner of the image,
    u to the right, v down.  Pixel (i, j) has its center at (j + 0.5, i + 0.5)
    and the image center is (width / 2, height / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateLineError,
    InvalidArgumentError,
    NoGroundIntersectionError,
)

DEFAULT_CAMERA_HEIGHT = 1.6  # meters

# cos(roll) below this makes the midpoint of the horizon meaningless
DEGENERATE_COS = 1e-6

# World-aligned axes (x right, y up, z back) -> camera axes (x right, y down, z forward).
WORLD_TO_CAMERA_BASIS = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class ImageDims:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width >= 1 and self.height >= 1):
            raise InvalidArgumentError(
                f"image dimensions must be >= 1, got {self.width}x{self.height}"
            )

    @property
    def aspect(self) -> float:
        """Width over height; also the horizontal half-extent in image units."""
        return self.width / self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2.0, self.height / 2.0])


@dataclass(frozen=True)
class CameraCalibration:
    """Vertical field of view, horizon midpoint and roll of a pinhole camera.

    Attributes:
        vfov: Vertical field of view in radians, in (0, pi).
        midpoint: Height at which the horizon crosses the image's vertical
            center line, in image units (top edge +1, bottom edge -1).
        roll: Camera roll in radians, in [-pi/2, pi/2].
    """

    vfov: float
    midpoint: float
    roll: float

    def __post_init__(self):
        if not (0.0 < self.vfov < math.pi):
            raise InvalidArgumentError(f"vfov must lie in (0, pi), got {self.vfov!r}")
        if not (-math.pi / 2 <= self.roll <= math.pi / 2):
            raise InvalidArgumentError(f"roll must lie in [-pi/2, pi/2], got {self.roll!r}")
        if not math.isfinite(self.midpoint):
            raise InvalidArgumentError(f"midpoint must be finite, got {self.midpoint!r}")

    @property
    def offset(self) -> float:
        """Signed perpendicular distance of the horizon from the image center."""
        return self.midpoint * math.cos(self.roll)

    @property
    def pitch(self) -> float:
        """Camera pitch in radians, accounting for roll."""
        return pitch_from_midpoint(self.offset, self.vfov)

    def to_dict(self) -> dict:
        return {
            "vfov_rad": float(self.vfov),
            "midpoint_units": float(self.midpoint),
            "roll_rad": float(self.roll),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CameraCalibration":
        try:
            return cls(
                vfov=float(data["vfov_rad"]),
                midpoint=float(data["midpoint_units"]),
                roll=float(data["roll_rad"]),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"calibration is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"malformed calibration: {exc}") from None

    @classmethod
    def from_angles(cls, vfov: float, pitch: float, roll: float) -> "CameraCalibration":
        """Build a calibration from a camera rotated by pitch then roll."""
        c = math.cos(roll)
        if abs(c) < DEGENERATE_COS:
            raise DegenerateLineError(f"roll {roll!r} leaves no finite horizon midpoint")
        return cls(vfov=vfov, midpoint=midpoint_from_pitch(pitch, vfov) / c, roll=roll)


@dataclass(frozen=True)
class HorizonLine:
    """Horizon as (slope, offset): the roll angle and the signed distance from center."""

    slope: float
    offset: float


@dataclass(frozen=True)
class HorizonFeature:
    """Heights (image units) where the horizon meets the left and right image borders."""

    y_left: float
    y_right: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y_left, self.y_right], dtype=float)


def _check_vfov(vfov):
    v = np.asarray(vfov, dtype=float)
    if not np.all((v > 0) & (v < np.pi)):
        raise InvalidArgumentError(f"vfov must lie in (0, pi), got {vfov!r}")


def vfov_from_focal_px(f_px, dims: ImageDims):
    """Vertical field of view (radians) of a camera with focal length ``f_px`` pixels."""
    f = np.asarray(f_px, dtype=float)
    if not np.all(f > 0):
        raise InvalidArgumentError(f"focal length must be positive, got {f_px!r}")
    out = 2.0 * np.arctan(dims.height / (2.0 * f))
    return float(out) if out.ndim == 0 else out


def focal_px_from_vfov(vfov, dims: ImageDims):
    """Focal length in pixels giving vertical field of view ``vfov`` at ``dims.height``."""
    _check_vfov(vfov)
    out = dims.height / (2.0 * np.tan(np.asarray(vfov, dtype=float) / 2.0))
    return float(out) if out.ndim == 0 else out


def midpoint_from_pitch(pitch, vfov):
    """Horizon height in image units for a camera with no roll.

    The pixel offset ``f_px * tan(pitch)`` divided by the half-height
    ``f_px * tan(vfov / 2)``.
    """
    _check_vfov(vfov)
    p = np.asarray(pitch, dtype=float)
    if not np.all(np.abs(p) < np.pi / 2):
        raise InvalidArgumentError(f"|pitch| must be below pi/2, got {pitch!r}")
    out = np.tan(p) / np.tan(np.asarray(vfov, dtype=float) / 2.0)
    return float(out) if out.ndim == 0 else out


def pitch_from_midpoint(midpoint, vfov):
    """Inverse of :func:`midpoint_from_pitch`."""
    _check_vfov(vfov)
    m = np.asarray(midpoint, dtype=float)
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError(f"midpoint must be finite, got {midpoint!r}")
    out = np.arctan(m * np.tan(np.asarray(vfov, dtype=float) / 2.0))
    return float(out) if out.ndim == 0 else out


def slope_offset_from_calibration(calib: CameraCalibration) -> HorizonLine:
    if abs(calib.roll) >= math.pi / 2:
        raise DegenerateLineError("a vertical horizon has no slope/offset form")
    return HorizonLine(slope=calib.roll, offset=calib.midpoint * math.cos(calib.roll))


def calibration_from_slope_offset(line: HorizonLine, vfov: float) -> CameraCalibration:
    c = math.cos(line.slope)
    if c < DEGENERATE_COS:
        raise DegenerateLineError(f"slope {line.slope!r} is too close to vertical")
    return CameraCalibration(vfov=vfov, midpoint=line.offset / c, roll=line.slope)


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_angles(pitch: float, roll: float, yaw: float = 0.0) -> np.ndarray:
    """Camera rotation ``Rz(roll) @ Rx(pitch) @ Ry(yaw)``.

    Acts on directions already expressed in the camera basis (see module
    docstring), so ``R @ WORLD_TO_CAMERA_BASIS`` maps world directions into
    the camera frame.
    """
    for name, v in (("pitch", pitch), ("roll", roll), ("yaw", yaw)):
        if not math.isfinite(v):
            raise InvalidArgumentError(f"{name} must be finite, got {v!r}")
    return _rot_z(roll) @ _rot_x(pitch) @ _rot_y(yaw)


def world_to_camera(calib: CameraCalibration, yaw: float = 0.0) -> np.ndarray:
    """3x3 matrix taking world directions to camera-frame directions."""
    return rotation_from_angles(calib.pitch, calib.roll, yaw) @ WORLD_TO_CAMERA_BASIS


def intrinsics(calib: CameraCalibration, dims: ImageDims) -> np.ndarray:
    """Intrinsic matrix with the principal point at the image center."""
    f = focal_px_from_vfov(calib.vfov, dims)
    cx, cy = dims.center
    return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])


def project(point_world, calib: CameraCalibration, dims: ImageDims,
            camera_height: float = DEFAULT_CAMERA_HEIGHT) -> np.ndarray:
    """Pixel coordinates (u, v) of a world point seen by a camera at (0, camera_height, 0)."""
    p = np.asarray(point_world, dtype=float) - np.array([0.0, camera_height, 0.0])
    p_cam = world_to_camera(calib) @ p
    if not p_cam[2] > 0:
        raise BehindCameraError(f"point {point_world!r} is not in front of the camera")
    f = focal_px_from_vfov(calib.vfov, dims)
    return f * p_cam[:2] / p_cam[2] + dims.center


def pixel_ray(pixel, calib: CameraCalibration, dims: ImageDims) -> np.ndarray:
    """World-frame direction (not normalized) of the ray through ``pixel``."""
    f = focal_px_from_vfov(calib.vfov, dims)
    uv = (np.asarray(pixel, dtype=float) - dims.center) / f
    return world_to_camera(calib).T @ np.array([uv[0], uv[1], 1.0])


def unproject_to_ground(pixel, calib: CameraCalibration, dims: ImageDims,
                        camera_height: float = DEFAULT_CAMERA_HEIGHT) -> np.ndarray:
    """Point on the ground plane y = 0 seen at ``pixel``."""
    d = pixel_ray(pixel, calib, dims)
    if not d[1] < -1e-12 * np.linalg.norm(d):
        raise NoGroundIntersectionError(
            f"pixel {tuple(np.asarray(pixel, dtype=float))} is on or above the horizon"
        )
    t = camera_height / -d[1]
    return np.array([0.0, camera_height, 0.0]) + t * d


def horizon_edge_intersections(calib: CameraCalibration, dims: ImageDims) -> HorizonFeature:
    """Where the horizon crosses the left (x = -w/h) and right (x = +w/h) image borders."""
    if math.cos(calib.roll) < DEGENERATE_COS:
        raise DegenerateLineError(f"roll {calib.roll!r} is too close to vertical")
    rise = dims.aspect * math.tan(calib.roll)
    return HorizonFeature(y_left=calib.midpoint + rise, y_right=calib.midpoint - rise)


def units_to_pixels(point_units, dims: ImageDims) -> np.ndarray:
    """Image units (x right, y up, half-height 1) to pixel coordinates."""
    x, y = np.asarray(point_units, dtype=float)
    half = dims.height / 2.0
    return np.array([dims.width / 2.0 + x * half, half - y * half])


def pixels_to_units(pixel, dims: ImageDims) -> np.ndarray:
    u, v = np.asarray(pixel, dtype=float)
    half = dims.height / 2.0
    return np.array([(u - dims.width / 2.0) / half, (half - v) / half])
