import csv
import io
import json
import math

import numpy as np
import pytest
from PIL import Image

from horizoncal import cli
from horizoncal.camera_model import CameraCalibration, ImageDims, unproject_to_ground
from horizoncal.label_codec import decode, kl_loss, make_bins
from horizoncal.perceptual_measure import (
    QUERY_FIELDS,
    SensitivityModel,
    compensate_placement,
    load_study,
    sample_distortion,
    shipped_study_path,
)
from horizoncal.synthetic import scene_panorama


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def calib_json(vfov=1.0, midpoint=0.1, roll=0.05):
    return json.dumps(CameraCalibration(vfov, midpoint, roll).to_dict())


class TestUsage:
    def test_no_args(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["--help"])
        out = capsys.readouterr().out
        for name in ("generate-dataset", "export-bins", "encode", "decode", "kl-loss", "score",
                     "sample-distortion", "compensate", "retrieve-build", "retrieve-query",
                     "insert-point", "summarize"):
            assert name in out


class TestCodecCommands:
    def test_encode_vfov_one(self, capsys):
        assert run(capsys, "encode", "--param", "vfov", "--value", "1.0")[1] == "128\n"

    def test_encode_degrees(self, capsys):
        out = run(capsys, "encode", "--param", "slope", "--value", "10", "--degrees")[1]
        assert int(out) == make_bins("slope").bin_index(math.radians(10))

    def test_encode_out_of_range(self, capsys):
        code, out, err = run(capsys, "encode", "--param", "vfov", "--value", "3")
        assert code == 1 and out == "" and "error" in err

    def test_one_hot_then_decode(self, capsys, tmp_path):
        out = run(capsys, "encode", "--param", "offset", "--value", "0.3", "--one-hot")[1]
        (tmp_path / "p.json").write_text(out)
        got = float(run(capsys, "decode", "--param", "offset", "--probs", tmp_path / "p.json")[1])
        assert got == decode(json.loads(out), make_bins("offset"))

    def test_export_bins(self, capsys, tmp_path):
        run(capsys, "export-bins", "--out", tmp_path / "b.json")
        data = json.loads((tmp_path / "b.json").read_text())
        assert set(data) == {"slope", "offset", "vfov"}
        assert data["slope"]["edges"] == make_bins("slope").to_dict()["edges"]

    def test_kl_loss(self, capsys, tmp_path, rng):
        pred = rng.dirichlet(np.ones(256), size=3)
        target = rng.dirichlet(np.ones(256), size=3)
        (tmp_path / "p.json").write_text(json.dumps(pred.tolist()))
        (tmp_path / "t.json").write_text(json.dumps(dict(zip(("slope", "offset", "vfov"), target.tolist()))))
        out = run(capsys, "kl-loss", "--pred", tmp_path / "p.json", "--target", tmp_path / "t.json")[1]
        assert float(out) == kl_loss(pred, target)


class TestPerceptualCommands:
    def test_score_zero_error(self, capsys, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text(",".join(QUERY_FIELDS) + "\n0.05,0,0,0,55,0\n0.05,0.6,0,20,55,30\n")
        code, out, _ = run(capsys, "score", "--queries", path)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 2
        assert float(rows[0]["sensitivity"]) < 15
        assert float(rows[1]["sensitivity"]) > 80
        model = SensitivityModel(load_study(shipped_study_path()))
        assert float(rows[0]["sensitivity"]) == model.sensitivity(np.array([0.05, 0, 0, 0, 55, 0]))

    def test_score_jsonl_pairs(self, capsys, tmp_path):
        gt = CameraCalibration(1.0, 0.1, 0.0)
        (tmp_path / "q.jsonl").write_text(json.dumps({"gt": gt.to_dict(), "pred": gt.to_dict()}) + "\n")
        out = run(capsys, "score", "--queries", tmp_path / "q.jsonl", "-k", 5)[1]
        assert float(out.splitlines()[1].split(",")[-1]) < 15

    def test_score_bad_csv(self, capsys, tmp_path):
        (tmp_path / "q.csv").write_text("a,b\n1,2\n")
        assert run(capsys, "score", "--queries", tmp_path / "q.csv")[0] == 1

    def test_sample_distortion_reproducible(self, capsys):
        a = run(capsys, "sample-distortion", "--active", "pitch,vfov", "-n", 5, "--seed", 3)[1]
        b = run(capsys, "sample-distortion", "--active", "pitch,vfov", "-n", 5, "--seed", 3)[1]
        assert a == b
        rng = np.random.default_rng(3)
        first = sample_distortion(rng, ["pitch", "vfov"]).to_dict()
        assert json.loads(a.splitlines()[0]) == first

    def test_sample_distortion_bad(self, capsys):
        assert run(capsys, "sample-distortion", "--active", "yaw")[0] == 1

    def test_compensate(self, capsys):
        gt, d = calib_json(), calib_json(vfov=1.2)
        out = run(capsys, "compensate", "--gt", gt, "--distorted", d, "--anchor", 320, 400,
                  "--object-height-px", 60, "--width", 640, "--height", 480)[1]
        want = compensate_placement(CameraCalibration(1.0, 0.1, 0.05), CameraCalibration(1.2, 0.1, 0.05),
                                    (320, 400), 60.0, ImageDims(640, 480))
        assert json.loads(out)["scale_factor"] == want.scale_factor


class TestGeometryCommands:
    def test_insert_point(self, capsys):
        out = run(capsys, "insert-point", "--pixel", 320, 400, "--width", 640, "--height", 480,
                  "--vfov", 60, "--midpoint", 0.0)[1]
        p = unproject_to_ground((320, 400), CameraCalibration(math.radians(60), 0.0, 0.0), ImageDims(640, 480))
        got = json.loads(out)
        assert (got["x"], got["y"], got["z"]) == (p[0], p[1], p[2])

    def test_insert_point_above_horizon(self, capsys):
        code, _, err = run(capsys, "insert-point", "--pixel", 320, 10, "--width", 640, "--height", 480,
                           "--vfov", 60, "--midpoint", 0.0)
        assert code == 1 and err


class TestDatasetAndRetrieval:
    @pytest.fixture
    def dataset(self, capsys, tmp_path):
        panos = tmp_path / "panos"
        panos.mkdir()
        for i in range(3):
            Image.fromarray(scene_panorama(32, seed=i)).save(panos / f"p{i}.png")
        code, _, _ = run(capsys, "generate-dataset", "--pano-dir", panos, "--out-dir", tmp_path / "ds",
                         "--seed", 4, "--crops-per-pano", 2, "--out-size", 16)
        assert code == 0
        return tmp_path / "ds"

    def test_generate(self, dataset):
        lines = (dataset / "manifest.jsonl").read_text().splitlines()
        assert len(lines) == 6
        with Image.open(dataset / json.loads(lines[0])["image_path"]) as im:
            assert im.size == (16, 16)

    def test_generate_missing_dir(self, capsys, tmp_path):
        assert run(capsys, "generate-dataset", "--pano-dir", tmp_path / "nope", "--out-dir", tmp_path)[0] == 1

    def test_retrieve(self, capsys, dataset, tmp_path):
        run(capsys, "retrieve-build", "--manifest", dataset, "--out", tmp_path / "idx.jsonl")
        out = run(capsys, "retrieve-query", "--index", tmp_path / "idx.jsonl", "--image-id", "p1_001",
                  "--top-k", 3)[1]
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[0]["image_id"] == "p1_001" and float(rows[0]["distance"]) == 0.0
        assert len(rows) == 3

    def test_retrieve_from_calibrations(self, capsys, tmp_path):
        lines = [json.dumps({"image_id": n, **CameraCalibration(1.0, m, 0.0).to_dict(), "aspect": 1.5})
                 for n, m in (("a", 0.0), ("b", 0.5))]
        (tmp_path / "c.jsonl").write_text("\n".join(lines) + "\n")
        run(capsys, "retrieve-build", "--calibrations", tmp_path / "c.jsonl", "--out", tmp_path / "i.jsonl")
        out = run(capsys, "retrieve-query", "--index", tmp_path / "i.jsonl", "--vfov", 50,
                  "--midpoint", 0.45, "--roll", 0, "--aspect", "3:2")[1]
        assert out.splitlines()[1].split(",")[1] == "b"

    def test_retrieve_query_needs_key(self, capsys, tmp_path):
        (tmp_path / "i.jsonl").write_text('{"image_id": "a", "y_left": 0, "y_right": 0}\n')
        assert run(capsys, "retrieve-query", "--index", tmp_path / "i.jsonl")[0] == 1


class TestSummarize:
    def test_summarize(self, capsys, tmp_path):
        gt = CameraCalibration(1.0, 0.0, 0.0)
        rows = [{"gt": gt.to_dict(), "pred": CameraCalibration(1.0 + e, 0.0, 0.0).to_dict()}
                for e in (0.25, 0.5)]
        (tmp_path / "p.jsonl").write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code, out, _ = run(capsys, "summarize", "--pairs", tmp_path / "p.jsonl", "--bins", 1,
                           "--cdf-out", tmp_path / "cdf.csv")
        assert code == 0
        vfov_row = [r for r in csv.DictReader(io.StringIO(out)) if r["param"] == "vfov"][0]
        assert float(vfov_row["median"]) == 0.375
        assert (tmp_path / "cdf.csv").read_text().splitlines()[-1] == "0.5,1.0"
