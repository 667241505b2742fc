import json
import warnings

import numpy as np
import pytest

from artk.baselines import oracle_prediction
from artk.core import AnnotationRecord, MotionParameters, MotionType, PredictionRecord
from artk.datagen import generate_dataset
from artk.io import (
    DEFAULT_PART,
    ObjParseError,
    RecordParseError,
    format_obj,
    parse_obj,
    read_motion,
    read_obj,
    read_records,
    write_json,
    write_obj,
    write_records,
)


def test_obj_round_trip(tmp_path, cabinet):
    write_obj(tmp_path / "c.obj", cabinet)
    back = read_obj(tmp_path / "c.obj")
    assert np.array_equal(back.vertices, cabinet.vertices)
    assert back.part_ids == cabinet.part_ids
    for pid in cabinet.part_ids:
        got = {tuple(back.faces[i]) for i in back.part(pid).face_indices}
        want = {tuple(cabinet.faces[i]) for i in cabinet.part(pid).face_indices}
        assert got == want


def test_obj_precision():
    text = "v 0.1 0.30000000000000004 -1e-300\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    m = parse_obj(text)
    assert parse_obj(format_obj(m)).vertices.tolist() == m.vertices.tolist()


def test_obj_features():
    text = "# comment\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3\ng lid\nf -3 -2 -1\n"
    m = parse_obj(text)
    assert m.part_ids == (DEFAULT_PART, "lid")
    assert m.faces.tolist() == [[0, 1, 2], [0, 1, 2]]


def test_obj_errors():
    with pytest.raises(ObjParseError, match="only triangles are supported, got a face with 4 vertices"):
        parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ObjParseError) as err:
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    assert err.value.line == 4
    with pytest.raises(ObjParseError):
        parse_obj("v 0 0 0\n")
    with pytest.raises(ObjParseError):
        parse_obj("v 0 zero 0\nf 1 1 1\n")


def dataset():
    return generate_dataset(3, 4, split="object", seed=5)


def test_records_round_trip(tmp_path):
    ds = dataset()
    write_records(tmp_path / "a.jsonl", ds.train)
    back = read_records(tmp_path / "a.jsonl", AnnotationRecord)
    assert back == ds.train
    preds = [oracle_prediction(r, ds.meshes[r.mesh_path]) for r in ds.train]
    write_records(tmp_path / "p.jsonl", preds)
    got = read_records(tmp_path / "p.jsonl", PredictionRecord)
    assert [p.to_dict() for p in got] == [p.to_dict() for p in preds]


def test_records_file_format(tmp_path):
    ds = dataset()
    write_records(tmp_path / "a.jsonl", ds.train)
    raw = (tmp_path / "a.jsonl").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode("utf-8").splitlines()
    assert len(lines) == len(ds.train)
    assert set(json.loads(lines[0])) == set(AnnotationRecord.FIELDS)


def test_extras_kept_on_read_dropped_on_write(tmp_path):
    ds = dataset()
    d = ds.train[0].to_dict() | {"note": "hé", "score": 3}
    (tmp_path / "x.jsonl").write_text(json.dumps(d) + "\n\n", encoding="utf-8")
    (r,) = read_records(tmp_path / "x.jsonl", AnnotationRecord)
    assert dict(r.extras) == {"note": "hé", "score": 3}
    with pytest.warns(UserWarning, match="note"):
        write_records(tmp_path / "y.jsonl", [r])
    assert "note" not in (tmp_path / "y.jsonl").read_text(encoding="utf-8")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        write_records(tmp_path / "z.jsonl", ds.train)


def test_bad_records(tmp_path):
    ds = dataset()
    good = json.dumps(ds.train[0].to_dict())
    bad = dict(ds.train[0].to_dict())
    del bad["motion"]
    (tmp_path / "b.jsonl").write_text(good + "\n" + json.dumps(bad) + "\n", encoding="utf-8")
    with pytest.raises(RecordParseError, match=r"b\.jsonl:2"):
        read_records(tmp_path / "b.jsonl", AnnotationRecord)
    (tmp_path / "c.jsonl").write_text("{not json\n", encoding="utf-8")
    with pytest.raises(RecordParseError, match=r"c\.jsonl:1"):
        read_records(tmp_path / "c.jsonl", AnnotationRecord)


def test_motion_files(tmp_path):
    m = MotionParameters(MotionType.PRISMATIC, (0, 0, 1), (0, 0, 0), 0.25)
    write_json(tmp_path / "m.json", m.to_dict())
    assert read_motion(tmp_path / "m.json") == m
    write_json(tmp_path / "w.json", {"motion": m.to_dict(), "other": 1})
    assert read_motion(tmp_path / "w.json") == m
    write_json(tmp_path / "bad.json", {"axis": [0, 0, 1]})
    with pytest.raises(RecordParseError):
        read_motion(tmp_path / "bad.json")
