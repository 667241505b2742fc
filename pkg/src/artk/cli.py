"""``artk`` command-line tool.

Exit codes: 0 success, 2 bad arguments or inputs, 3 I/O or parse failure,
4 scene ids that do not line up between ground truth and predictions.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

from .articulation import animate, apply_motion
from .baselines import build_train_stats, freqmot_predict, oracle_prediction, randmot_predict
from .core import AnnotationRecord, ArtkError, Mesh, PredictionRecord, SceneMismatchError
from .datagen import KINDS, SCENES_PER_OBJECT, TRAIN_RATIO, generate_dataset
from .geometry import DEFAULT_WELD_EPS, connected_components
from .io import ObjParseError, RecordParseError, read_motion, read_obj, read_records, write_json, write_obj, write_records
from .metrics import MissingMeshError, evaluate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_MISMATCH = 4


class UsageError(ArtkError, ValueError):
    pass


def _parts_arg(text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("need at least one part id")
    return parts


def _load_meshes(mesh_dir: Path, records: Sequence[AnnotationRecord]) -> dict[str, Mesh]:
    meshes = {}
    for r in records:
        if r.mesh_path not in meshes:
            path = mesh_dir / r.mesh_path
            if not path.is_file():
                raise MissingMeshError(str(path))
            meshes[r.mesh_path] = read_obj(path)
    return meshes


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    ds = generate_dataset(
        args.objects, args.scenes, split=args.split, seed=args.seed,
        train_ratio=args.train_ratio, kinds=args.kinds,
    )
    out = Path(args.out)
    (out / "meshes").mkdir(parents=True, exist_ok=True)
    for obj in ds.objects:
        write_obj(out / "meshes" / obj.mesh_path, obj.mesh)
    write_records(out / "train.jsonl", ds.train)
    write_records(out / "val.jsonl", ds.val)
    manifest = dict(ds.config)
    manifest.update(
        n_train=len(ds.train),
        n_val=len(ds.val),
        objects={o.object_id: {"kind": o.kind, "mesh": f"meshes/{o.mesh_path}"} for o in ds.objects},
    )
    write_json(out / "manifest.json", manifest)
    print(f"wrote {len(ds.objects)} meshes, {len(ds.train)} train and {len(ds.val)} val scenes to {out}")
    return EXIT_OK


def cmd_articulate(args) -> int:
    mesh = read_obj(args.mesh)
    motion = read_motion(args.motion)
    write_obj(args.out, apply_motion(mesh, args.parts, motion))
    return EXIT_OK


def cmd_animate(args) -> int:
    mesh = read_obj(args.mesh)
    motion = read_motion(args.motion)
    frames = animate(mesh, args.parts, motion, args.frames, args.t_max)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        write_obj(out / f"frame_{k:04d}.obj", frame)
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    eval_records = read_records(args.eval, AnnotationRecord)
    mesh_dir = Path(args.meshes)
    meshes = _load_meshes(mesh_dir, eval_records)
    if args.method == "oracle":
        preds = [oracle_prediction(r, meshes[r.mesh_path]) for r in eval_records]
    else:
        if args.train is None:
            raise UsageError(f"--train is required for {args.method}")
        train = read_records(args.train, AnnotationRecord)
        if args.method == "randmot":
            preds = [randmot_predict(train, r, meshes[r.mesh_path], args.seed) for r in eval_records]
        else:
            stats = build_train_stats(train, _load_meshes(mesh_dir, train), k=args.k, seed=args.seed)
            preds = [freqmot_predict(stats, r, meshes[r.mesh_path], args.seed) for r in eval_records]
    write_records(args.out, preds)
    print(f"wrote {len(preds)} {args.method} predictions to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gt = read_records(args.gt, AnnotationRecord)
    pred = read_records(args.pred, PredictionRecord)
    meshes = _load_meshes(Path(args.meshes), gt)
    start = time.perf_counter()
    report = evaluate(gt, pred, meshes, with_3d=not args.no_3d)
    write_json(args.out, report.to_dict())
    for key, value in report.to_dict().items():
        print(f"{key}: {value}")
    print(f"evaluated {report.n_scenes} scenes in {time.perf_counter() - start:.2f}s")
    return EXIT_OK


def cmd_segment_cc(args) -> int:
    mesh = read_obj(args.mesh)
    labeling, _ = connected_components(mesh, args.weld_eps)
    groups = {f"cc_{k}": [int(i) for i in idx] for k, idx in enumerate(labeling.groups())}
    write_json(args.out, groups)
    print(f"{labeling.count} components")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artk", description="Articulated-object geometry and evaluation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic annotated dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--objects", type=int, required=True)
    g.add_argument("--scenes", type=int, default=SCENES_PER_OBJECT)
    g.add_argument("--split", choices=("image", "object"), default="image")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--train-ratio", type=float, default=TRAIN_RATIO)
    g.add_argument("--kinds", type=_parts_arg, default=list(KINDS), help="comma-separated object kinds")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("articulate", help="apply a motion to mesh parts")
    a.add_argument("--mesh", required=True)
    a.add_argument("--parts", type=_parts_arg, required=True, help="comma-separated part ids")
    a.add_argument("--motion", required=True, help="JSON file with motion_type/axis/origin/magnitude")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_articulate)

    n = sub.add_parser("animate", help="write frames from rest to a scaled motion")
    n.add_argument("--mesh", required=True)
    n.add_argument("--parts", type=_parts_arg, required=True)
    n.add_argument("--motion", required=True)
    n.add_argument("--frames", type=int, required=True)
    n.add_argument("--t-max", type=float, default=1.0)
    n.add_argument("--out-dir", required=True)
    n.set_defaults(func=cmd_animate)

    b = sub.add_parser("baseline", help="run a heuristic predictor")
    b.add_argument("--method", choices=("randmot", "freqmot", "oracle"), required=True)
    b.add_argument("--train")
    b.add_argument("--eval", required=True)
    b.add_argument("--meshes", required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--k", type=int, default=10, help="clusters for freqmot")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("evaluate", help="score predictions against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--meshes", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--no-3d", action="store_true", help="skip Chamfer and F-score")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("segment-cc", help="split a mesh into connected components")
    s.add_argument("--mesh", required=True)
    s.add_argument("--weld-eps", type=float, default=DEFAULT_WELD_EPS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment_cc)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SceneMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for sid in exc.missing:
            print(f"  missing: {sid}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ObjParseError, RecordParseError, MissingMeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArtkError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
