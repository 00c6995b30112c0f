"""Write SYNTHETIC equirectangular panoramas (PNG) for exercising generate-dataset."""

import argparse
from pathlib import Path

from PIL import Image

from horizoncal.synthetic import scene_panorama


def write_panoramas(out_dir, n: int, height: int = 128, seed: int = 0) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n):
        path = out_dir / f"synth_{i:03d}.png"
        Image.fromarray(scene_panorama(height, seed=seed + i)).save(path)
        paths.append(path)
    return paths


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("-n", type=int, default=10)
    parser.add_argument("--height", type=int, default=128)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    for path in write_panoramas(args.out_dir, args.n, args.height, args.seed):
        print(path)


if __name__ == "__main__":
    main()
