import math

import numpy as np
import pytest

from artk.baselines import oracle_prediction
from artk.core import (
    LengthMismatchError,
    MotionParameters,
    MotionType,
    PoseSpec,
    PredictionRecord,
    SceneMismatchError,
    ZeroAxisError,
)
from artk.datagen import AZIMUTH_RANGE, ELEVATION_RANGE, INPLANE_RANGE, generate_dataset
from artk.geometry import EmptyCloudError, merge_meshes, sample_pointcloud
from artk.metrics import (
    MetricsReport,
    MissingMeshError,
    axis_error_deg,
    chamfer,
    eval_points,
    evaluate,
    f_score,
    infer_moved_parts,
    magnitude_errors,
    origin_error_l1,
    pose_acc30,
    seg_accuracy,
)

from conftest import square
from oracles import brute_chamfer, brute_fscore, euler_oracle, quaternion_angle_deg

REV, PRI = MotionType.REVOLUTE, MotionType.PRISMATIC


class TestPose:
    def test_all_equal(self):
        p = PoseSpec(10, 20, 30)
        assert pose_acc30([(p, p)] * 5) == 100.0

    def test_exactly_thirty_fails(self):
        assert pose_acc30([(PoseSpec(0, 0, 0), PoseSpec(30, 0, 0))]) == 0.0
        assert pose_acc30([(PoseSpec(0, 0, 0), PoseSpec(29.999, 0, 0))]) == 100.0

    def test_monte_carlo_uniform(self):
        rng = np.random.default_rng(0)

        def draw():
            return PoseSpec(rng.uniform(*AZIMUTH_RANGE), rng.uniform(*ELEVATION_RANGE), rng.uniform(*INPLANE_RANGE))

        pairs = [(draw(), draw()) for _ in range(4000)]
        got = pose_acc30(pairs)
        # independent estimate through per-axis matrices and quaternion angles
        hits = [quaternion_angle_deg(euler_oracle(*g.as_tuple()), euler_oracle(*p.as_tuple())) < 30 for g, p in pairs]
        assert abs(got - 100 * np.mean(hits)) <= 2.0


class TestMotionMetrics:
    def test_axis(self):
        assert axis_error_deg((0, 0, 1), (0, 0, 1)) == 0
        assert axis_error_deg((0, 0, 1), (0, 0, -1)) == 180
        assert axis_error_deg((1, 0, 0), (1, 1, 0)) == pytest.approx(45, abs=1e-12)
        with pytest.raises(ZeroAxisError):
            axis_error_deg((0, 0, 0), (1, 0, 0))

    def test_origin(self):
        assert origin_error_l1((0, 0, 0), (0, 0, 0), REV) == 0
        assert origin_error_l1((0, 0, 0), (0.1, -0.2, 0.3), REV) == pytest.approx(0.6)
        assert origin_error_l1((0, 0, 0), (1, 1, 1), PRI) is None

    def test_magnitude(self):
        gt_r = MotionParameters(REV, (0, 0, 1), (0, 0, 0), math.radians(90))
        assert magnitude_errors(gt_r.magnitude, gt_r) == ("mag_r", 0.0)
        kind, err = magnitude_errors(math.radians(60), gt_r)
        assert kind == "mag_r" and err == pytest.approx(30)
        kind, err = magnitude_errors(0.25, MotionParameters(PRI, (0, 0, 1), (0, 0, 0), 0.30))
        assert kind == "mag_p" and err == pytest.approx(0.05)


class TestSegAccuracy:
    def test_examples(self):
        mask = np.arange(1000) < 200
        assert seg_accuracy(mask.astype(float), mask) == 100
        assert seg_accuracy(np.zeros(1000), mask) == 80
        with pytest.raises(LengthMismatchError):
            seg_accuracy([0.1], mask)

    def test_random_binomial(self):
        rng = np.random.default_rng(1)
        mask = rng.random(1000) < 0.3
        acc = seg_accuracy(rng.integers(0, 2, 1000).astype(float), mask)
        assert abs(acc - 50) <= 5

    def test_threshold_is_strict(self):
        assert seg_accuracy([0.5], [True]) == 0.0


class TestClouds:
    def test_identical(self):
        a = np.random.default_rng(2).random((100, 3))
        assert chamfer(a, a) == 0 and f_score(a, a) == 100

    def test_two_points(self):
        assert chamfer([[0, 0, 0]], [[0.1, 0, 0]]) == pytest.approx(2.0)

    def test_far_apart(self):
        a = np.array([[0, 0, 0], [5, 0, 0]], float)
        assert f_score(a, a + [0.2, 0, 0]) == 0

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a, b = rng.random((150, 3)), rng.random((120, 3)) * 1.2
            assert abs(chamfer(a, b) - brute_chamfer(a, b)) < 1e-9
            assert abs(f_score(a, b) - brute_fscore(a, b)) < 1e-9
            assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-12)
            assert f_score(a, b) == pytest.approx(f_score(b, a), abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyCloudError):
            chamfer(np.zeros((0, 3)), [[0, 0, 0]])


def two_squares():
    return merge_meshes([square("a", 0.0), square("b", 2.0)])


class TestInferMovedParts:
    def test_mapping(self):
        m = two_squares()
        assert infer_moved_parts(m, {"a": 1.0, "b": 0.0}, 0) == {"a"}

    def test_per_point_sequence(self):
        m = two_squares()
        cloud = sample_pointcloud(m, 1000, 4)
        probs = (cloud.part_ids == "b").astype(float)
        assert infer_moved_parts(m, probs, 0, eval_cloud=cloud) == {"b"}
        with pytest.raises(ValueError):
            infer_moved_parts(m, probs, 0)

    def test_exactly_half_excluded(self):
        m = two_squares()
        calls = []

        def half(points, part_id):
            calls.append(len(points))
            out = np.zeros(len(points))
            out[: len(points) // 2] = 1.0
            return out

        assert infer_moved_parts(m, half, 0) == set()
        assert calls == [100, 100]

        def half_plus_one(points, part_id):
            out = np.zeros(len(points))
            out[: len(points) // 2 + 1] = 1.0
            return out

        assert infer_moved_parts(m, half_plus_one, 0) == {"a", "b"}

    def test_deterministic(self):
        m = two_squares()

        def stripes(points, part_id):
            return (points[:, 0] % 1 < 0.5).astype(float)

        assert infer_moved_parts(m, stripes, 5) == infer_moved_parts(m, stripes, 5)

    def test_planted_70_percent(self):
        m = two_squares()

        def planted(points, part_id):
            # 70% of part a's area is moveable, 30% of part b's
            frac = 0.7 if part_id == "a" else 0.3
            return ((points[:, 0] % 2) < frac).astype(float)

        picks = [infer_moved_parts(m, planted, s) for s in range(500)]
        assert sum(p == {"a"} for p in picks) >= 499


def small_dataset():
    return generate_dataset(4, 6, split="object", seed=1, train_ratio=0.5)


class TestEvaluate:
    def test_oracle_perfect(self):
        ds = small_dataset()
        recs = ds.train + ds.val
        preds = [oracle_prediction(r, ds.meshes[r.mesh_path]) for r in recs]
        rep = evaluate(recs, preds, ds.meshes)
        assert rep.pose_acc30 == 100 and rep.type_acc == 100 and rep.seg_acc == 100
        assert rep.axis_err_deg < 1e-6 and rep.chamfer < 1e-6 and rep.f1_at_0_1 > 99.9
        assert rep.n_revolute + rep.n_prismatic == rep.n_scenes == len(recs)

    def test_order_invariant(self):
        ds = small_dataset()
        rng = np.random.default_rng(0)
        preds = []
        for r in ds.val:
            p = oracle_prediction(r, ds.meshes[r.mesh_path])
            preds.append(PredictionRecord(r.scene_id, p.pose, tuple(rng.normal(size=2)), tuple(rng.normal(size=3)),
                                          tuple(rng.normal(size=3)), float(rng.normal()), p.point_moveable_prob))
        a = evaluate(ds.val, preds, ds.meshes)
        b = evaluate(ds.val[::-1], preds[3:] + preds[:3], ds.meshes)
        assert a == b

    def test_mismatch(self):
        ds = small_dataset()
        preds = [oracle_prediction(r, ds.meshes[r.mesh_path]) for r in ds.val]
        with pytest.raises(SceneMismatchError) as err:
            evaluate(ds.val, preds[1:], ds.meshes, with_3d=False)
        assert err.value.missing == (ds.val[0].scene_id,)
        with pytest.raises(SceneMismatchError):
            evaluate(ds.val, preds + preds[:1], ds.meshes, with_3d=False)

    def test_missing_mesh(self):
        ds = small_dataset()
        preds = [oracle_prediction(r, ds.meshes[r.mesh_path]) for r in ds.val]
        with pytest.raises(MissingMeshError):
            evaluate(ds.val, preds, {}, with_3d=False)

    def test_absent_origin_when_no_revolute_prediction(self):
        ds = small_dataset()
        preds = []
        for r in ds.val:
            p = oracle_prediction(r, ds.meshes[r.mesh_path])
            preds.append(PredictionRecord(r.scene_id, p.pose, (0.0, 1.0), p.axis, p.origin, p.magnitude,
                                          p.point_moveable_prob))
        rep = evaluate(ds.val, preds, ds.meshes, with_3d=False)
        assert rep.origin_err_l1 is None and "origin_err_l1" not in rep.to_dict()
        assert "chamfer" not in rep.to_dict()
        assert MetricsReport.from_dict(rep.to_dict()) == rep

    def test_eval_points_fixed(self):
        ds = small_dataset()
        r = ds.val[0]
        a, b = eval_points(ds.meshes[r.mesh_path], r), eval_points(ds.meshes[r.mesh_path], r)
        assert a.n == 1000 and np.array_equal(a.points, b.points)
