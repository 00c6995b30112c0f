import json
import math

import numpy as np
import pytest
from scipy import stats

from horizoncal.camera_model import CameraCalibration, ImageDims
from horizoncal.errors import CalibrationError, InvalidArgumentError, SchemaError
from horizoncal.perceptual_measure import (
    DISTORTED_PARAMS,
    DISTORTION_RANGES_DEG,
    QUERY_SCALE,
    DistortionSpec,
    SensitivityModel,
    apply_distortion,
    compensate_placement,
    height_for_pixel_height,
    knn_sensitivity,
    load_study,
    projected_height,
    query_from_calibrations,
    sample_distortion,
    save_study,
    sensitivity_from_pct,
    shipped_study_path,
)
from horizoncal.synthetic import random_calibration, synthetic_pct, synthetic_study

DIMS = ImageDims(640, 480)


def brute_force_neighbors(features, query, k):
    """Independent nearest-neighbor oracle: per-record loop, ties broken by index."""
    dists = [math.sqrt(sum(((f[j] - query[j]) / QUERY_SCALE[j]) ** 2 for j in range(6)))
             for f in features]
    return np.lexsort((np.arange(len(dists)), np.asarray(dists)))[:k]


def random_features(rng, n):
    lo = np.array([-1.5, -0.5, -40, -20, 10, -50])
    hi = np.array([1.5, 0.5, 40, 20, 100, 50])
    return rng.uniform(lo, hi, (n, 6))


class TestSensitivityMapping:
    @pytest.mark.parametrize("pct,expected", [(50, 0.0), (100, 100.0), (75, 50.0), (80, 60.0), (20, 0.0)])
    def test_values(self, pct, expected):
        assert sensitivity_from_pct(pct) == expected

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            sensitivity_from_pct(101)


class TestKnn:
    def test_brute_force_equivalence(self, rng):
        feats = random_features(rng, 2000)
        pct = rng.uniform(50, 100, 2000)
        model = SensitivityModel.from_arrays(feats, pct, k=15)
        queries = random_features(rng, 60)
        got = model.neighbors(queries)
        for q, idx in zip(queries, got):
            want = brute_force_neighbors(feats, q, 15)
            np.testing.assert_array_equal(idx, want)
            expected = max(0.0, (pct[want].mean() - 50) / 50 * 100)
            assert model.sensitivity(q) == pytest.approx(expected, abs=1e-12)

    def test_constant_neighbors(self, rng):
        model = SensitivityModel.from_arrays(random_features(rng, 50), np.full(50, 80.0), k=15)
        assert model.sensitivity(np.zeros(6)) == pytest.approx(60.0)

    def test_scaled_equidistance(self):
        # one record per axis at exactly one scale unit from the origin
        feats = np.zeros((6, 6))
        feats[[0, 1, 2, 3, 4, 5], [1, 1, 3, 3, 5, 5]] = [0.2, -0.2, 12.0, -12.0, 15.0, -15.0]
        model = SensitivityModel.from_arrays(feats, np.linspace(60, 90, 6), k=6)
        d = np.linalg.norm(model._features, axis=1)
        np.testing.assert_allclose(d, 1.0, rtol=0, atol=1e-15)
        # ties resolve to record order
        np.testing.assert_array_equal(SensitivityModel.from_arrays(feats, np.full(6, 70.0), k=2)
                                      .neighbors(np.zeros(6))[0], [0, 1])

    def test_scale_decides_nearest(self):
        feats = np.zeros((2, 6))
        feats[0, 1] = 0.21  # just over one pitch unit
        feats[1, 3] = 12.0  # exactly one roll unit
        model = SensitivityModel.from_arrays(feats, [100.0, 50.0], k=1)
        assert model.neighbors(np.zeros(6))[0, 0] == 1

    def test_permutation_of_records(self, rng):
        feats = random_features(rng, 300)
        pct = rng.uniform(50, 100, 300)
        perm = rng.permutation(300)
        q = random_features(rng, 20)
        a = SensitivityModel.from_arrays(feats, pct).sensitivity(q)
        b = SensitivityModel.from_arrays(feats[perm], pct[perm]).sensitivity(q)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_record_constructor_matches_arrays(self):
        recs = synthetic_study(200, seed=4)
        q = recs[0].query()
        m1 = SensitivityModel(recs, k=5)
        m2 = SensitivityModel.from_arrays([r.query() for r in recs], [r.pct_chose_gt for r in recs], k=5)
        assert m1.sensitivity(q) == m2.sensitivity(q) == knn_sensitivity(q, recs, k=5)

    @pytest.mark.parametrize("k", [0, 11])
    def test_bad_k(self, k):
        with pytest.raises(InvalidArgumentError):
            SensitivityModel.from_arrays(np.zeros((10, 6)), np.full(10, 60.0), k=k)

    def test_bad_query(self):
        model = SensitivityModel.from_arrays(np.zeros((10, 6)), np.full(10, 60.0), k=3)
        with pytest.raises(InvalidArgumentError):
            model.neighbors(np.zeros(5))
        with pytest.raises(InvalidArgumentError):
            model.neighbors([np.nan] * 6)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            SensitivityModel([])


@pytest.fixture(scope="module")
def model():
    return SensitivityModel(load_study(shipped_study_path()))


@pytest.fixture(scope="module")
def draws():
    rng = np.random.default_rng(5)
    return [sample_distortion(rng, DISTORTED_PARAMS) for _ in range(5000)]


class TestShippedStudy:
    def test_zero_error_is_low(self, model):
        for calib in (CameraCalibration(0.96, 0.05, 0.0), CameraCalibration(0.7, -0.3, 0.05)):
            assert model.score(calib, calib) < 15

    def test_large_error_is_high(self, model):
        gt = CameraCalibration(0.96, 0.05, 0.0)
        est = CameraCalibration(0.96, 0.05, math.radians(25))
        assert model.score(gt, est) > 80

    def test_synthetic_surface_shape(self):
        assert synthetic_pct(np.zeros(6)) == 50.0
        assert synthetic_pct([0, 1.0, 0, 0, 50, 0]) > 99


class TestDistortion:
    @pytest.mark.parametrize("name,attr", [("pitch", "d_pitch"), ("roll", "d_roll"), ("vfov", "d_vfov")])
    def test_ranges_and_uniform(self, draws, name, attr):
        lo, hi = DISTORTION_RANGES_DEG[name]
        vals = np.array([getattr(d, attr) for d in draws])
        mag = np.abs(vals)
        assert mag.min() >= lo and mag.max() <= hi
        assert stats.kstest(mag, stats.uniform(lo, hi - lo).cdf).pvalue > 0.01
        assert stats.binomtest(int((vals > 0).sum()), len(vals)).pvalue > 0.01

    def test_inactive_are_zero(self, rng):
        d = sample_distortion(rng, ["roll"])
        assert d.d_pitch == 0.0 and d.d_vfov == 0.0 and d.d_roll != 0.0

    @pytest.mark.parametrize("active", [[], ["yaw"]])
    def test_bad_active(self, rng, active):
        with pytest.raises(InvalidArgumentError):
            sample_distortion(rng, active)

    def test_apply_vfov_only_keeps_horizon(self):
        gt = CameraCalibration(1.0, 0.3, 0.1)
        d = apply_distortion(gt, DistortionSpec(d_vfov=10.0, active=frozenset({"vfov"})))
        assert d.midpoint == gt.midpoint and d.roll == gt.roll
        assert d.vfov == pytest.approx(1.0 + math.radians(10))

    def test_apply_pitch(self):
        gt = CameraCalibration(1.0, 0.3, 0.1)
        d = apply_distortion(gt, DistortionSpec(d_pitch=5.0, active=frozenset({"pitch"})))
        assert d.pitch == pytest.approx(gt.pitch + math.radians(5), abs=1e-12)

    def test_apply_invalid(self):
        with pytest.raises(InvalidArgumentError):
            apply_distortion(CameraCalibration(0.2, 0.0, 0.0), DistortionSpec(d_vfov=-20.0))


class TestPlacement:
    def test_identity(self):
        gt = CameraCalibration(1.0, 0.2, 0.05)
        p = compensate_placement(gt, gt, (300, 400), 80.0, DIMS)
        assert p.scale_factor == 1.0
        np.testing.assert_array_equal(p.anchor_px, [300, 400])

    def test_level_vfov_only_scale_is_one(self):
        gt = CameraCalibration(1.0, 0.0, 0.0)
        d = CameraCalibration(1.3, 0.0, 0.0)
        assert compensate_placement(gt, d, (320, 420), 60.0, DIMS).scale_factor == pytest.approx(1.0, abs=1e-12)

    def test_height_inverse_of_projection(self):
        calib = CameraCalibration(0.9, 0.3, 0.1)
        h = height_for_pixel_height((350, 430), 75.0, calib, DIMS)
        assert projected_height((350, 430), h, calib, DIMS) == pytest.approx(75.0, abs=1e-9)

    def test_random_distorted_cases_match_height(self):
        rng = np.random.default_rng(21)
        done = 0
        while done < 100:
            gt = random_calibration(rng)
            active = [p for p in DISTORTED_PARAMS if rng.random() < 0.5] or ["pitch"]
            anchor = (rng.uniform(50, 590), rng.uniform(300, 470))
            world_h = rng.uniform(0.3, 2.0)
            try:
                distorted = apply_distortion(gt, sample_distortion(rng, active))
                px = projected_height(anchor, world_h, gt, DIMS)
                placement = compensate_placement(gt, distorted, anchor, px, DIMS)
                rendered = projected_height(placement.anchor_px, world_h * placement.scale_factor,
                                            distorted, DIMS)
            except CalibrationError:
                continue
            assert abs(rendered - px) < 0.5
            done += 1

    def test_rejects_above_horizon(self):
        gt = CameraCalibration(1.0, 0.0, 0.0)
        with pytest.raises(CalibrationError):
            compensate_placement(gt, gt, (320, 100), 50.0, DIMS)


class TestStudyIO:
    def test_roundtrip(self, tmp_path):
        recs = synthetic_study(25, seed=1)
        save_study(recs, tmp_path / "s.jsonl")
        assert load_study(tmp_path / "s.jsonl") == recs

    def test_query_layout(self):
        gt = CameraCalibration(1.0, 0.2, 0.1)
        est = CameraCalibration(1.2, 0.1, 0.0)
        np.testing.assert_allclose(query_from_calibrations(gt, est),
                                   [0.2, -0.1, math.degrees(0.1), -math.degrees(0.1),
                                    math.degrees(1.0), math.degrees(0.2)])

    def test_schema_error_names_field(self, tmp_path):
        rec = synthetic_study(1, seed=0)[0].to_dict()
        rec["pct_chose_gt"] = 120
        path = tmp_path / "bad.jsonl"
        path.write_text("\n" + json.dumps(rec) + "\n")
        with pytest.raises(SchemaError, match=r"bad.jsonl:2:.*pct_chose_gt"):
            load_study(path)

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("gt"),
        lambda d: d.update(n_votes=0),
        lambda d: d["distorted"].update(vfov_rad=-1.0),
    ])
    def test_schema_errors(self, tmp_path, mutate):
        rec = synthetic_study(1, seed=0)[0].to_dict()
        mutate(rec)
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(SchemaError):
            load_study(path)

    def test_invalid_json(self, tmp_path):
        (tmp_path / "x.jsonl").write_text("{nope\n")
        with pytest.raises(SchemaError, match=":1:"):
            load_study(tmp_path / "x.jsonl")
