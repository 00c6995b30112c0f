"""Turning calibration values into 256-way classification targets and back.

Run: python3 demos/03_label_codec.py
"""

import numpy as np

from horizoncal.camera_model import CameraCalibration
from horizoncal.label_codec import decode, encode_calibration, kl_loss, make_bins


def main():
    specs = {k: make_bins(k) for k in ("slope", "offset", "vfov")}
    for kind, spec in specs.items():
        w = spec.widths
        print(f"{kind:>6}: range [{spec.low:+.3f}, {spec.high:+.3f}], "
              f"bin width {w.min():.5f} (narrowest) .. {w.max():.5f} (widest)")

    calib = CameraCalibration(vfov=0.9, midpoint=0.25, roll=0.03)
    target = encode_calibration(calib, specs)
    print("target bins:", [int(np.argmax(t)) for t in target])

    # A softened "prediction": the one-hot target blurred over neighboring bins.
    kernel = np.exp(-0.5 * (np.arange(-6, 7) / 2.0) ** 2)
    pred = np.stack([np.convolve(t, kernel, mode="same") for t in target])
    pred /= pred.sum(axis=1, keepdims=True)
    print(f"KL(target || prediction) summed over heads: {kl_loss(pred, target):.4f}")
    for (kind, spec), p in zip(specs.items(), pred):
        print(f"decoded {kind}: {decode(p, spec):+.4f}")


if __name__ == "__main__":
    main()
