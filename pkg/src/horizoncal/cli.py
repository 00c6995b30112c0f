"""Command-line entry point: ``horizoncal <subcommand> ...``.

Data goes to stdout (CSV tables, JSON lines, bare numbers); diagnostics go
to stderr.  Angle flags are in degrees unless ``--radians`` is given, except
``encode``/``decode`` which work in the label codec's native units.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import label_codec, panorama_sampler, perceptual_measure, retrieval_index, summary
from .camera_model import CameraCalibration, ImageDims, horizon_edge_intersections, unproject_to_ground
from .errors import CalibrationError, InvalidArgumentError

log = logging.getLogger("horizoncal")


def _read_json_or_stdin(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return json.loads(text)


def _read_jsonl(path: str) -> list:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InvalidArgumentError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    return out


def _angle(value: float, radians: bool) -> float:
    return value if radians else math.radians(value)


def _calibration_from_flags(args) -> CameraCalibration:
    return CameraCalibration(
        vfov=_angle(args.vfov, args.radians),
        midpoint=args.midpoint,
        roll=_angle(args.roll, args.radians),
    )


def _parse_aspect(text: str) -> float:
    if ":" in text:
        w, h = text.split(":", 1)
        return float(w) / float(h)
    return float(text)


def _calibration_arg(text: str) -> CameraCalibration:
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = json.loads(Path(text).read_text())
    return CameraCalibration.from_dict(data)


def _write_csv(rows, header) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _heads(data) -> np.ndarray:
    if isinstance(data, dict):
        return np.array([data[k] for k in label_codec.PARAM_KINDS], dtype=float)
    return np.asarray(data, dtype=float)


# -- subcommands ------------------------------------------------------------

def cmd_generate_dataset(args) -> int:
    config_path = args.config or panorama_sampler.default_config_path()
    config = (panorama_sampler.SamplingConfig.from_json_file(config_path)
              if config_path else panorama_sampler.SamplingConfig())
    overrides = {}
    if args.crops_per_pano is not None:
        overrides["crops_per_pano"] = args.crops_per_pano
    if args.out_size is not None:
        overrides["out_size"] = args.out_size
    if overrides:
        config = panorama_sampler.SamplingConfig.from_dict({**config.to_dict(), **overrides})
    manifest = panorama_sampler.build_dataset(
        args.pano_dir, args.out_dir, config=config, seed=args.seed,
        split_fractions=tuple(args.split_fractions), workers=args.workers,
    )
    log.info("wrote %d crops", len(manifest))
    print(Path(args.out_dir) / panorama_sampler.MANIFEST_NAME)
    return 0


def cmd_export_bins(args) -> int:
    kinds = label_codec.PARAM_KINDS if args.param == "all" else (args.param,)
    payload = {k: label_codec.make_bins(k).to_dict() for k in kinds}
    if args.param != "all":
        payload = payload[args.param]
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_encode(args) -> int:
    spec = label_codec.make_bins(args.param)
    value = math.radians(args.value) if args.degrees else args.value
    if args.one_hot:
        print(json.dumps([float(p) for p in label_codec.encode(value, spec)]))
    else:
        print(spec.bin_index(value))
    return 0


def cmd_decode(args) -> int:
    spec = label_codec.make_bins(args.param)
    probs = _read_json_or_stdin(args.probs)
    print(repr(label_codec.decode(probs, spec, method=args.method)))
    return 0


def cmd_kl_loss(args) -> int:
    pred = _heads(_read_json_or_stdin(args.pred))
    target = _heads(_read_json_or_stdin(args.target))
    print(repr(label_codec.kl_loss(pred, target)))
    return 0


def _load_queries(path: str) -> np.ndarray:
    if path.endswith(".jsonl"):
        rows = []
        for rec in _read_jsonl(path):
            gt = CameraCalibration.from_dict(rec["gt"])
            pred = CameraCalibration.from_dict(rec["pred"])
            rows.append(perceptual_measure.query_from_calibrations(gt, pred))
        return np.array(rows).reshape(-1, 6)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(perceptual_measure.QUERY_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise InvalidArgumentError(f"query CSV is missing column(s) {sorted(missing)}")
        rows = [[float(r[f]) for f in perceptual_measure.QUERY_FIELDS] for r in reader]
    return np.array(rows, dtype=float).reshape(-1, 6)


def cmd_score(args) -> int:
    records_path = args.records or perceptual_measure.shipped_study_path()
    records = perceptual_measure.load_study(records_path)
    model = perceptual_measure.SensitivityModel(records, k=args.k)
    queries = _load_queries(args.queries)
    sens = model.sensitivity(queries) if len(queries) else np.empty(0)
    rows = [[i, *(repr(float(v)) for v in q), repr(float(s))]
            for i, (q, s) in enumerate(zip(queries, np.atleast_1d(sens)))]
    _write_csv(rows, ["query", *perceptual_measure.QUERY_FIELDS, "sensitivity"])
    return 0


def cmd_sample_distortion(args) -> int:
    active = [a.strip() for a in args.active.split(",") if a.strip()]
    rng = np.random.default_rng(args.seed)
    for _ in range(args.n):
        print(json.dumps(perceptual_measure.sample_distortion(rng, active).to_dict()))
    return 0


def cmd_compensate(args) -> int:
    placement = perceptual_measure.compensate_placement(
        _calibration_arg(args.gt), _calibration_arg(args.distorted), args.anchor,
        args.object_height_px, ImageDims(args.width, args.height), args.camera_height,
    )
    print(json.dumps({"anchor_px": [float(v) for v in placement.anchor_px],
                      "scale_factor": placement.scale_factor}))
    return 0


def cmd_retrieve_build(args) -> int:
    if args.manifest:
        entries = panorama_sampler.load_manifest(args.manifest, check_files=False).records
    else:
        entries = []
        for rec in _read_jsonl(args.calibrations):
            entries.append((rec["image_id"], CameraCalibration.from_dict(rec),
                            float(rec.get("aspect", 1.0))))
    index = retrieval_index.build_index(entries)
    index.to_jsonl(args.out)
    log.info("indexed %d images", len(index))
    print(args.out)
    return 0


def cmd_retrieve_query(args) -> int:
    index = retrieval_index.RetrievalIndex.from_jsonl(args.index)
    if args.image_id is not None:
        feature = index.feature(args.image_id)
    else:
        if args.vfov is None or args.midpoint is None or args.roll is None:
            raise InvalidArgumentError("give --image-id or all of --vfov, --midpoint, --roll")
        calib = _calibration_from_flags(args)
        aspect = _parse_aspect(args.aspect)
        dims = ImageDims(aspect, 1.0) if aspect >= 1 else ImageDims(1.0, 1.0 / aspect)
        feature = horizon_edge_intersections(calib, dims)
    results = index.query(feature, args.top_k)
    _write_csv([[r, i, repr(d)] for r, (i, d) in enumerate(results, 1)], ["rank", "image_id", "distance"])
    return 0


def cmd_insert_point(args) -> int:
    calib = _calibration_from_flags(args)
    point = unproject_to_ground(args.pixel, calib, ImageDims(args.width, args.height), args.camera_height)
    print(json.dumps({"x": float(point[0]), "y": float(point[1]), "z": float(point[2]),
                      "distance": float(math.hypot(point[0], point[2]))}))
    return 0


def cmd_summarize(args) -> int:
    pairs = [(CameraCalibration.from_dict(r["gt"]), CameraCalibration.from_dict(r["pred"]))
             for r in _read_jsonl(args.pairs)]
    result = summary.summarize_errors(pairs, args.bins)
    sys.stdout.write(result.bins_csv())
    if args.cdf_out:
        Path(args.cdf_out).write_text(result.cdf_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="horizoncal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("generate-dataset", help="extract labeled crops from a folder of panoramas")
    p.add_argument("--pano-dir", required=True, help="folder of 2:1 equirectangular PNG/JPEG images")
    p.add_argument("--out-dir", required=True, help="destination for crops/ and manifest.jsonl")
    p.add_argument("--config", help="JSON sampling config (default: $HORIZONCAL_CONFIG, else built-in)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crops-per-pano", type=int)
    p.add_argument("--out-size", type=int)
    p.add_argument("--split-fractions", type=float, nargs=3, default=(0.8, 0.1, 0.1),
                   metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--workers", type=int, default=1, help="threads for crop extraction")
    p.set_defaults(func=cmd_generate_dataset)

    p = sub.add_parser("export-bins", help="write the 256-bin edges/centers as JSON")
    p.add_argument("--param", choices=(*label_codec.PARAM_KINDS, "all"), default="all")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_export_bins)

    p = sub.add_parser("encode", help="bin index (or one-hot vector) of a parameter value")
    p.add_argument("--param", choices=label_codec.PARAM_KINDS, required=True)
    p.add_argument("--value", type=float, required=True,
                   help="radians for slope/vfov, image units for offset")
    p.add_argument("--degrees", action="store_true", help="interpret --value in degrees")
    p.add_argument("--one-hot", action="store_true", help="print the full distribution as JSON")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="value of a 256-entry distribution")
    p.add_argument("--param", choices=label_codec.PARAM_KINDS, required=True)
    p.add_argument("--probs", required=True, help="JSON list file, or - for stdin")
    p.add_argument("--method", choices=("expectation", "argmax"), default="expectation")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("kl-loss", help="summed KL divergence of three heads")
    p.add_argument("--pred", required=True, help='JSON: [[256], [256], [256]] or {"slope": ..., ...}')
    p.add_argument("--target", required=True)
    p.set_defaults(func=cmd_kl_loss)

    p = sub.add_parser("score", help="perceptual sensitivity of calibration errors (CSV)")
    p.add_argument("--records", help="study records JSONL (default: bundled SYNTHETIC records)")
    p.add_argument("--queries", required=True,
                   help="CSV with columns " + ",".join(perceptual_measure.QUERY_FIELDS)
                   + ", or JSONL of {gt, pred} calibrations")
    p.add_argument("-k", type=int, default=perceptual_measure.DEFAULT_K)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sample-distortion", help="draw study distortions (degrees) as JSON lines")
    p.add_argument("--active", required=True, help="comma-separated subset of pitch,roll,vfov")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_distortion)

    p = sub.add_parser("compensate", help="anchor and scale that keep an object's image footprint")
    p.add_argument("--gt", required=True, help="calibration JSON (inline or file)")
    p.add_argument("--distorted", required=True, help="calibration JSON (inline or file)")
    p.add_argument("--anchor", type=float, nargs=2, required=True, metavar=("U", "V"))
    p.add_argument("--object-height-px", type=float, required=True)
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--camera-height", type=float, default=1.6)
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("retrieve-build", help="index images by horizon border intersections")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="dataset manifest (file or directory)")
    src.add_argument("--calibrations",
                     help="JSONL of {image_id, vfov_rad, midpoint_units, roll_rad, aspect}")
    p.add_argument("--out", required=True, help="index JSONL to write")
    p.set_defaults(func=cmd_retrieve_build)

    p = sub.add_parser("retrieve-query", help="nearest images by horizon position (CSV)")
    p.add_argument("--index", required=True)
    p.add_argument("--image-id")
    p.add_argument("--vfov", type=float)
    p.add_argument("--midpoint", type=float, help="horizon midpoint, image units")
    p.add_argument("--roll", type=float)
    p.add_argument("--aspect", default="4:3", help="W:H or a number")
    p.add_argument("--radians", action="store_true")
    p.add_argument("--top-k", type=int, default=4)
    p.set_defaults(func=cmd_retrieve_query)

    p = sub.add_parser("insert-point", help="ground-plane point under a pixel (meters)")
    p.add_argument("--pixel", type=float, nargs=2, required=True, metavar=("U", "V"))
    p.add_argument("--width", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--vfov", type=float, required=True)
    p.add_argument("--midpoint", type=float, required=True)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--radians", action="store_true")
    p.add_argument("--camera-height", type=float, default=1.6)
    p.set_defaults(func=cmd_insert_point)

    p = sub.add_parser("summarize", help="binned error quartiles (CSV) for {gt, pred} pairs")
    p.add_argument("--pairs", required=True, help="JSONL of {gt, pred} calibrations")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--cdf-out", help="also write the |vfov error| CDF table here")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CalibrationError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"horizoncal {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
