"""Camera geometry walkthrough: field of view, horizon position and ground-plane placement.

Run: python3 demos/01_camera_geometry.py
"""

import math

from horizoncal.camera_model import (
    CameraCalibration,
    ImageDims,
    focal_px_from_vfov,
    horizon_edge_intersections,
    midpoint_from_pitch,
    project,
    slope_offset_from_calibration,
    unproject_to_ground,
)


def main():
    dims = ImageDims(640, 480)

    # A 60 degree lens on a 480 px tall image.
    vfov = math.radians(60)
    print(f"focal length for 60 deg vfov at 480 px: {focal_px_from_vfov(vfov, dims):.2f} px")

    # Tilting the camera down by 10 degrees lifts the horizon above the image center.
    pitch = math.radians(10)
    midpoint = midpoint_from_pitch(pitch, vfov)
    print(f"horizon midpoint for 10 deg pitch: {midpoint:+.4f} image units")

    # Add some roll and look at the horizon in its other parameterizations.
    calib = CameraCalibration.from_angles(vfov, pitch, math.radians(5))
    line = slope_offset_from_calibration(calib)
    edges = horizon_edge_intersections(calib, dims)
    print(f"slope {math.degrees(line.slope):.1f} deg, offset {line.offset:+.4f}")
    print(f"horizon meets the left border at {edges.y_left:+.4f} and the right at {edges.y_right:+.4f}")

    # Click a pixel on the ground and find where it is in the world (camera 1.6 m up).
    pixel = (400.0, 420.0)
    ground = unproject_to_ground(pixel, calib, dims)
    print(f"pixel {pixel} lands on the ground at x={ground[0]:.2f} m, z={ground[2]:.2f} m")
    print(f"projecting it back gives {project(ground, calib, dims).round(6)}")


if __name__ == "__main__":
    main()
