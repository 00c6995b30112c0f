"""How noticeable is a calibration error? Scoring with the bundled SYNTHETIC study records.

The records shipped with the package come from a hand-made response surface,
not from human viewers, so the numbers only illustrate the mechanics.

Run: python3 demos/04_perceptual_score.py
"""

import math

from horizoncal.camera_model import CameraCalibration, ImageDims
from horizoncal.perceptual_measure import (
    SensitivityModel,
    compensate_placement,
    load_study,
    shipped_study_path,
)


def main():
    model = SensitivityModel(load_study(shipped_study_path()))
    gt = CameraCalibration.from_angles(math.radians(50), math.radians(3), 0.0)

    estimates = {
        "exact": gt,
        "vfov +8 deg": CameraCalibration(gt.vfov + math.radians(8), gt.midpoint, gt.roll),
        "vfov -25 deg": CameraCalibration(gt.vfov - math.radians(25), gt.midpoint, gt.roll),
        "roll 10 deg": CameraCalibration(gt.vfov, gt.midpoint, math.radians(10)),
        "horizon +0.4": CameraCalibration(gt.vfov, gt.midpoint + 0.4, gt.roll),
    }
    for name, est in estimates.items():
        print(f"{name:>13}: sensitivity {model.score(gt, est):5.1f}")

    # Inserting an object under a wrong camera: keep its anchor, rescale to keep its size.
    dims = ImageDims(640, 480)
    placement = compensate_placement(gt, estimates["horizon +0.4"], (320, 400), 90.0, dims)
    print(f"object at (320, 400) needs scale {placement.scale_factor:.3f} under the wrong horizon")


if __name__ == "__main__":
    main()
