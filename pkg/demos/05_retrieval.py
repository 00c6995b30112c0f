"""Find images whose horizon sits where a query camera's horizon would.

Run: python3 demos/05_retrieval.py
"""

import math

import numpy as np

from horizoncal.camera_model import CameraCalibration, ImageDims, horizon_edge_intersections
from horizoncal.retrieval_index import build_index
from horizoncal.synthetic import random_calibration


def main():
    rng = np.random.default_rng(3)
    library = [(f"photo_{i:04d}", random_calibration(rng), 4 / 3) for i in range(2000)]
    index = build_index(library)

    query_cam = CameraCalibration(vfov=math.radians(45), midpoint=-0.2, roll=math.radians(4))
    feature = horizon_edge_intersections(query_cam, ImageDims(4 / 3, 1.0))
    print(f"query horizon: left {feature.y_left:+.3f}, right {feature.y_right:+.3f}")
    for rank, (image_id, dist) in enumerate(index.query(feature, top_k=5), 1):
        f = index.feature(image_id)
        print(f"{rank}. {image_id}  left {f.y_left:+.3f} right {f.y_right:+.3f}  distance {dist:.4f}")


if __name__ == "__main__":
    main()
