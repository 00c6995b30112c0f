"""Regenerate the bundled SYNTHETIC study records (src/horizoncal/data/synthetic_study.jsonl)."""

import argparse
import json
from pathlib import Path

from horizoncal.synthetic import synthetic_study

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "horizoncal" / "data" / "synthetic_study.jsonl"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-n", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=2018)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()

    def rounded(d):
        return {k: round(v, 6) for k, v in d.items()}

    with open(args.out, "w") as fh:
        for rec in synthetic_study(args.n, seed=args.seed):
            d = rec.to_dict()
            d["gt"] = rounded(d["gt"])
            d["distorted"] = rounded(d["distorted"])
            d["pct_chose_gt"] = round(d["pct_chose_gt"], 3)
            fh.write(json.dumps(d) + "\n")
    print(args.out)


if __name__ == "__main__":
    main()
