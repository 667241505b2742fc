import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artk.core import (
    AnnotationRecord,
    LengthMismatchError,
    Mesh,
    MotionParameters,
    MotionType,
    NonUnitAxisError,
    PartGroup,
    PointCloud,
    PoseBinned,
    PoseSpec,
    PredictionRecord,
    UnknownPartError,
    ZeroAxisError,
    derive_seed,
    normalize_axis,
    scene_seed,
    validate_mesh,
    wrap_degrees,
)
from artk.core import OutOfRangeBinError

from conftest import unit_cube


def make_record(**kw) -> AnnotationRecord:
    base = dict(
        scene_id="s0",
        object_id="o0",
        mesh_path="o0.obj",
        pose=PoseSpec(10.0, -5.0, 3.0),
        fov_deg=40.0,
        moved_part_id="body",
        motion=MotionParameters(MotionType.REVOLUTE, (0, 1, 0), (0.1, 0.2, 0.3), 0.7),
        pointcloud_seed=123,
    )
    base.update(kw)
    return AnnotationRecord(**base)


class TestValidateMesh:
    def test_unit_cube_is_valid(self, cube):
        assert validate_mesh(cube) == []

    def test_index_out_of_range(self):
        v = np.zeros((8, 3))
        m = Mesh(v, [[0, 1, 99]], (PartGroup("a", (0,)),))
        assert validate_mesh(m) == ["face 0: index out of range"]

    def test_overlapping_parts(self, cube):
        parts = (PartGroup("a", tuple(range(0, 4))), PartGroup("b", tuple(range(3, 12))))
        assert validate_mesh(Mesh(cube.vertices, cube.faces, parts)) == ["parts overlap at face 3"]

    def test_uncovered_face(self, cube):
        m = Mesh(cube.vertices, cube.faces, (PartGroup("a", tuple(range(11))),))
        assert validate_mesh(m) == ["face 11: not covered by any part"]

    def test_empty_and_duplicate(self, cube):
        parts = (PartGroup("a", tuple(range(12))), PartGroup("a", ()))
        problems = validate_mesh(Mesh(cube.vertices, cube.faces, parts))
        assert "part 'a': duplicate part id" in problems
        assert "part 'a': empty" in problems

    def test_no_geometry(self):
        problems = validate_mesh(Mesh(np.zeros((0, 3)), np.zeros((0, 3)), ()))
        assert "mesh has no vertices" in problems and "mesh has no faces" in problems

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.lists(st.integers(-5, 20), min_size=3, max_size=3), max_size=10),
           st.lists(st.lists(st.integers(-3, 12), max_size=6), max_size=4))
    def test_total_on_garbage(self, faces, groups):
        parts = tuple(PartGroup(f"p{i}", tuple(g)) for i, g in enumerate(groups))
        out = validate_mesh(Mesh(np.zeros((8, 3)), np.array(faces).reshape(-1, 3), parts))
        assert isinstance(out, list)


class TestNormalizeAxis:
    def test_examples(self):
        assert normalize_axis((0, 0, 2)).tolist() == [0, 0, 1]
        np.testing.assert_allclose(normalize_axis((3, 4, 0)), (0.6, 0.8, 0), atol=1e-15)

    def test_zero(self):
        with pytest.raises(ZeroAxisError):
            normalize_axis((0, 0, 0))
        with pytest.raises(ZeroAxisError):
            normalize_axis((1e-10, 0, 0))

    @given(st.tuples(*[st.floats(-1e3, 1e3)] * 3).filter(lambda v: math.hypot(*v) > 1e-6))
    def test_unit_and_parallel(self, v):
        u = normalize_axis(v)
        assert abs(np.linalg.norm(u) - 1) < 1e-12
        assert np.linalg.norm(np.cross(u, np.asarray(v) / np.linalg.norm(v))) < 1e-12


class TestMotionAndPose:
    def test_axis_must_be_unit(self):
        with pytest.raises(NonUnitAxisError):
            MotionParameters(MotionType.PRISMATIC, (0, 0, 2), (0, 0, 0), 0.1)

    def test_magnitude_finite(self):
        with pytest.raises(ValueError):
            MotionParameters(MotionType.PRISMATIC, (0, 0, 1), (0, 0, 0), math.inf)

    def test_pose_ranges(self):
        with pytest.raises(ValueError):
            PoseSpec(180.0, 0, 0)
        with pytest.raises(ValueError):
            PoseSpec(0, 90.5, 0)
        assert PoseSpec(-180.0, 90.0, -180.0).elevation_deg == 90.0

    def test_from_degrees_wraps(self):
        p = PoseSpec.from_degrees(190.0, 0.0, -190.0)
        assert p.azimuth_deg == pytest.approx(-170.0) and p.inplane_deg == pytest.approx(170.0)

    def test_wrap_keeps_in_range_values_bit_exact(self):
        for a in (-180.0, -0.1, 0.0, 179.99999999999997):
            assert wrap_degrees(a) == a
        assert -180.0 <= wrap_degrees(-180.00000000000003) < 180.0

    def test_binned_ranges(self):
        with pytest.raises(OutOfRangeBinError):
            PoseBinned((24, 0, 0), (0, 0, 0))
        with pytest.raises(ValueError):
            PoseBinned((0, 0, 0), (0, -0.1, 0))


class TestRecords:
    def test_fov_range(self):
        with pytest.raises(ValueError):
            make_record(fov_deg=61.0)

    def test_check_mesh(self):
        make_record().check_mesh(unit_cube())
        with pytest.raises(UnknownPartError):
            make_record(moved_part_id="door_0").check_mesh(unit_cube())

    @given(
        az=st.floats(-180, 180, exclude_max=True),
        el=st.floats(-90, 90),
        fov=st.floats(20, 60),
        mag=st.floats(-10, 10),
        seed=st.integers(0, 2**63),
    )
    def test_annotation_json_round_trip(self, az, el, fov, mag, seed):
        rec = make_record(pose=PoseSpec(az, el, 0.0), fov_deg=fov, pointcloud_seed=seed,
                          motion=MotionParameters("prismatic", (0, 0, -1), (1, 2, 3), mag))
        back = AnnotationRecord.from_dict(json.loads(json.dumps(rec.to_dict())))
        assert back == rec

    def test_unknown_fields_kept_in_extras(self):
        d = make_record().to_dict()
        d["note"] = "hi"
        rec = AnnotationRecord.from_dict(d)
        assert rec.extras["note"] == "hi"
        assert "note" not in rec.to_dict()

    def test_prediction_round_trip_both_prob_forms(self):
        for probs in ([0.0, 0.5, 1.0], {"a": 1.0, "b": 0.0}):
            pred = PredictionRecord("s", PoseBinned((1, 2, 3), (0.1, 0.2, 0.3)), (1.0, -1.0),
                                    (0, 0, 1), (0, 0, 0), 0.5, probs,
                                    pose_logits={"azimuth": [0] * 24, "elevation": [0] * 12, "inplane": [0] * 24})
            assert PredictionRecord.from_dict(json.loads(json.dumps(pred.to_dict()))) == pred

    def test_prediction_validation(self):
        pose = PoseBinned((0, 0, 0), (0, 0, 0))
        with pytest.raises(ValueError):
            PredictionRecord("s", pose, (1.0, math.nan), (0, 0, 1), (0, 0, 0), 0.0, [0.5])
        with pytest.raises(ValueError):
            PredictionRecord("s", pose, (1.0, 0.0), (0, 0, 1), (0, 0, 0), 0.0, [1.5])
        with pytest.raises(LengthMismatchError):
            PredictionRecord("s", pose, (1.0, 0.0), (0, 0, 1), (0, 0, 0), 0.0, [0.5],
                             pose_logits={"azimuth": [0] * 23, "elevation": [0] * 12, "inplane": [0] * 24})

    def test_predicted_type(self):
        pose = PoseBinned((0, 0, 0), (0, 0, 0))
        assert PredictionRecord("s", pose, (0.0, 1.0), (0, 0, 1), (0, 0, 0), 0, []).predicted_type is MotionType.PRISMATIC
        assert PredictionRecord("s", pose, (2.0, 1.0), (0, 0, 1), (0, 0, 0), 0, []).predicted_type is MotionType.REVOLUTE


class TestTypesAreImmutable:
    def test_mesh_arrays_read_only(self, cube):
        with pytest.raises(ValueError):
            cube.vertices[0, 0] = 1.0

    def test_cloud_length_check(self):
        with pytest.raises(LengthMismatchError):
            PointCloud(np.zeros((3, 3)), ["a", "b"])

    def test_part_class(self):
        assert PartGroup("drawer_2", (0,)).part_class == "drawer"
        assert PartGroup("body", (0,)).part_class == "body"
        assert PartGroup("cc_x", (0,)).part_class == "cc_x"


def test_seeds_are_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert scene_seed(0, "a") == scene_seed(0, "a") != scene_seed(0, "b")
