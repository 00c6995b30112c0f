"""Build a small labeled crop dataset from synthetic panoramas.

Writes into a temporary directory unless an output path is given.

Run: python3 demos/02_dataset_from_panoramas.py [out_dir]
"""

import sys
import tempfile
from collections import Counter
from pathlib import Path

from PIL import Image

from horizoncal.panorama_sampler import SamplingConfig, build_dataset
from horizoncal.synthetic import scene_panorama


def main(out_dir: Path):
    pano_dir = out_dir / "panos"
    pano_dir.mkdir(parents=True, exist_ok=True)
    for i in range(4):
        Image.fromarray(scene_panorama(128, seed=i)).save(pano_dir / f"scene_{i}.png")

    config = SamplingConfig(crops_per_pano=5, out_size=128)
    manifest = build_dataset(pano_dir, out_dir / "dataset", config=config, seed=7)

    print(f"{len(manifest)} crops written under {out_dir / 'dataset'}")
    print("aspect ratios:", dict(Counter(f"{r.aspect_w}:{r.aspect_h}" for r in manifest.records)))
    print("panoramas per split:", {k: sorted(v) for k, v in manifest.splits().items()})
    first = manifest.records[0]
    print(f"first crop {first.crop_id}: vfov {first.vfov_rad:.3f} rad, "
          f"horizon {first.midpoint_units:+.3f}, roll {first.roll_rad:+.4f} rad")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(Path(tmp))
