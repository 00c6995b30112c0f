import math

import numpy as np
import pytest

from horizoncal.camera_model import CameraCalibration, HorizonFeature, ImageDims
from horizoncal.errors import InvalidArgumentError, SchemaError
from horizoncal.retrieval_index import RetrievalIndex, build_index, query
from horizoncal.synthetic import random_calibration


def brute_force(ids, feats, q, top_k):
    """Oracle ranking: sort (distance, id) tuples."""
    scored = sorted((math.hypot(f[0] - q[0], f[1] - q[1]), i) for i, f in zip(ids, feats))
    return [(i, d) for d, i in scored[:top_k]]


def make_index(rng, n):
    ids = [f"img{i:05d}" for i in rng.permutation(n)]
    return RetrievalIndex(ids, rng.uniform(-2, 2, (n, 2)))


class TestBuild:
    def test_feature_matches_edge_formula(self):
        calib = CameraCalibration(1.0, 0.3, 0.2)
        index = build_index([("a", calib, ImageDims(640, 480))])
        a = 640 / 480
        f = index.feature("a")
        assert f.y_left == pytest.approx(0.3 + a * math.tan(0.2))
        assert f.y_right == pytest.approx(0.3 - a * math.tan(0.2))

    def test_aspect_number_equals_dims(self):
        calib = CameraCalibration(1.0, -0.2, 0.1)
        a = build_index([("a", calib, 4 / 3)]).feature("a")
        b = build_index([("a", calib, ImageDims(400, 300))]).feature("a")
        assert a.y_left == pytest.approx(b.y_left) and a.y_right == pytest.approx(b.y_right)

    def test_duplicate_ids(self):
        with pytest.raises(InvalidArgumentError):
            RetrievalIndex(["a", "a"], [[0, 0], [1, 1]])

    def test_non_finite(self):
        with pytest.raises(InvalidArgumentError):
            RetrievalIndex(["a"], [[np.inf, 0]])

    def test_unknown_id(self):
        with pytest.raises(InvalidArgumentError):
            RetrievalIndex(["a"], [[0, 0]]).feature("b")


class TestQuery:
    def test_self_query(self, rng):
        index = build_index([(f"c{i}", random_calibration(rng), 4 / 3) for i in range(300)])
        for image_id in index.ids:
            (best, dist), = index.query(index.feature(image_id), top_k=1)
            assert best == image_id and dist == 0.0

    def test_brute_force(self, rng):
        index = make_index(rng, 3000)
        for q in rng.uniform(-2.5, 2.5, (100, 2)):
            got = index.query(HorizonFeature(*q), top_k=10)
            want = brute_force(index.ids, index.features, q, 10)
            assert [i for i, _ in got] == [i for i, _ in want]
            np.testing.assert_allclose([d for _, d in got], [d for _, d in want], rtol=1e-12)

    def test_ties_broken_by_id(self):
        index = RetrievalIndex(["z", "b", "m"], [[1, 0], [-1, 0], [0, 1]])
        assert [i for i, _ in index.query(HorizonFeature(0, 0), top_k=3)] == ["b", "m", "z"]

    def test_top_k_larger_than_index(self):
        index = RetrievalIndex(["a", "b"], [[0, 0], [1, 1]])
        assert len(query(index, HorizonFeature(0, 0), top_k=10)) == 2

    def test_empty_and_bad_k(self):
        assert RetrievalIndex([], np.zeros((0, 2))).query(HorizonFeature(0, 0)) == []
        with pytest.raises(InvalidArgumentError):
            RetrievalIndex(["a"], [[0, 0]]).query(HorizonFeature(0, 0), top_k=0)


class TestPersistence:
    def test_roundtrip(self, rng, tmp_path):
        index = make_index(rng, 50)
        index.to_jsonl(tmp_path / "i.jsonl")
        back = RetrievalIndex.from_jsonl(tmp_path / "i.jsonl")
        assert back.ids == index.ids
        np.testing.assert_array_equal(back.features, index.features)

    def test_malformed(self, tmp_path):
        (tmp_path / "i.jsonl").write_text('{"image_id": "a", "y_left": 0}\n')
        with pytest.raises(SchemaError, match=":1:"):
            RetrievalIndex.from_jsonl(tmp_path / "i.jsonl")
