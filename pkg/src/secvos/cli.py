"""``secvos`` command line: track, eval, stats, scene, synth.

Exit codes: 0 success, 1 validation error, 2 backend or protocol error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .errors import BackendError, SecvosError, ValidationError

log = logging.getLogger("secvos")

EXIT_OK, EXIT_VALIDATION, EXIT_BACKEND = 0, 1, 2


def _load_config_file(path: str) -> dict[str, Any]:
    p = Path(path)
    try:
        text = p.read_bytes()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from e
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ImportError:
            import tomli as tomllib
        try:
            data = tomllib.loads(text.decode("utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ValidationError(f"bad TOML in {path}: {e}") from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"bad JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a table/object")
    # allow the fields either at top level or under [tracker]
    return dict(data.get("tracker", data))


def build_config(args: argparse.Namespace):
    from .pipeline import TrackerConfig

    cfg = TrackerConfig()
    if args.config:
        cfg = TrackerConfig.from_mapping(_load_config_file(args.config), cfg)
    overrides = {
        "mode": args.mode,
        "scene_threshold": args.scene_threshold,
        "memory_window": args.memory_window,
        "keyframe_capacity": args.keyframe_capacity,
        "force_concept_every_frame": True if args.force_concept else None,
        "disable_concept": True if args.no_concept else None,
        "keep_going": True if args.keep_going else None,
    }
    return TrackerConfig.from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)


def _write_json(path: str | Path, obj: Any) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str | Path, rows: Sequence[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


# -- track ------------------------------------------------------------------

def _track_one(frames_dir: str, first_mask: str | None, gt_dir: str | None, out_dir: str,
               pixel_spec: str, concept_spec: str, config, timeout: float) -> dict:
    import numpy as np

    from .backends import FrameStore, make_endpoint
    from .io import load_frames, read_label_map, split_labels, write_predictions
    from .pipeline import track

    frames, names = load_frames(frames_dir)
    if first_mask is None:
        first_mask = str(Path(gt_dir) / f"{names[0]}.png")
    labels = read_label_map(first_mask)
    ids = sorted(set(np.unique(labels).tolist()) - {0})
    if not ids:
        raise ValidationError(f"first-frame mask {first_mask} contains no objects")
    first_masks = split_labels(labels, ids)
    store = FrameStore(frames)
    pixel = make_endpoint(pixel_spec, "pixel", store, frames_dir=frames_dir, timeout=timeout)
    try:
        concept = make_endpoint(concept_spec, "concept", store, frames_dir=frames_dir, timeout=timeout)
        try:
            result = track(frames, first_masks, config, pixel, concept)
        finally:
            concept.close()
    finally:
        pixel.close()
    write_predictions(result, out_dir, names, extra_stats={"config": config.to_dict()})
    return result.stats.to_dict(timings=False)


def _track_job(job):
    return _track_one(*job)


def cmd_track(args) -> int:
    config = build_config(args)
    if args.dataset:
        from .io import DatasetLayout

        layout = DatasetLayout(args.dataset)
        jobs = [(str(layout.frames_dir(v)), None, str(layout.annotations_dir(v)), str(Path(args.out) / v),
                 args.pixel_backend, args.concept_backend, config, args.timeout)
                for v in layout.videos()]
        if args.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_track_job, jobs))
        else:
            results = [_track_job(j) for j in jobs]
        for job, stats in zip(jobs, results):
            print(f"{Path(job[3]).name}: ratio={stats['concept_guidance_ratio']:.4f}")
        return EXIT_OK
    if not args.frames or not args.first_mask:
        raise ValidationError("track needs --frames and --first-mask (or --dataset)")
    stats = _track_one(args.frames, args.first_mask, None, args.out, args.pixel_backend,
                       args.concept_backend, config, args.timeout)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


# -- eval -------------------------------------------------------------------

def _read_scenes(path: str) -> dict[str, list[int]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "videos" in data:
        data = data["videos"]
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected an object mapping video names to cut lists")
    out = {}
    for name, v in data.items():
        cuts = v.get("cuts") if isinstance(v, dict) else v
        if not isinstance(cuts, list):
            raise ValidationError(f"{path}: bad cut list for {name!r}")
        out[name] = [int(c) for c in cuts]
    return out


def cmd_eval(args) -> int:
    from .io import evaluate_dataset

    scenes = None if args.scenes == "auto" else _read_scenes(args.scenes)
    tol = None if args.tolerance == "auto" else int(args.tolerance)
    report = evaluate_dataset(args.pred, args.gt, scenes, tol, args.workers)
    _write_json(args.out, report.to_json())
    csv_path = Path(args.csv) if args.csv else Path(args.out).with_suffix(".csv")
    _write_csv(csv_path, report.videos)
    _write_csv(csv_path.with_name(csv_path.stem + "_summary.csv"), [report.summary_row()])
    o = report.overall
    print(f"J&F={o['J&F']:.4f} J={o['J']:.4f} F={o['F']:.4f} videos={o['videos']}")
    return EXIT_OK


# -- stats ------------------------------------------------------------------

def cmd_stats(args) -> int:
    from .io import DatasetLayout, iter_videos
    from .metrics import dataset_stats

    layout = DatasetLayout(args.dataset)
    default_fps = None if args.fps == "none" else float(args.fps)
    videos = list(iter_videos(layout, default_fps))
    stats = dataset_stats(videos, args.threshold, args.h_bins, args.s_bins)
    defaulted = sorted(v.name for v in videos if v.fps_defaulted)
    stats["fps_defaulted_videos"] = defaulted
    stats["scene_count_note"] = "detector-dependent estimate"
    if args.out:
        _write_json(args.out, stats)
    if args.csv:
        _write_csv(args.csv, [{k: v for k, v in stats.items() if not isinstance(v, list)}])
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


# -- scene ------------------------------------------------------------------

def cmd_scene(args) -> int:
    from .io import load_frames
    from .scenedetect import segment_scenes

    frames, _ = load_frames(args.frames)
    scenes = segment_scenes(frames, args.threshold, args.h_bins, args.s_bins)
    if args.out:
        _write_json(args.out, scenes.to_json())
    print(json.dumps(scenes.to_json()))
    return EXIT_OK


# -- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    from . import synth

    if args.suite == "acceptance":
        specs = synth.acceptance_suite(args.seed, args.noise)
    elif args.suite == "toy":
        specs = [synth.toy_tracking_spec(args.seed, args.noise)]
    else:
        specs = [synth.late_concept_spec()]
    for spec in specs:
        synth.generate_synthetic(spec, args.out)
        print(f"{spec.name}: {spec.n_frames} frames, cuts {list(spec.cut_indices)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secvos", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="segment a video (or a dataset) with the scene-adaptive tracker")
    t.add_argument("--frames", help="directory of frames, filename order = time order")
    t.add_argument("--first-mask", help="palette PNG with the first-frame objects")
    t.add_argument("--dataset", help="track every video of a dataset root instead")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--pixel-backend", default="toy", help="toy | echo | tcp://host:port | command line")
    t.add_argument("--concept-backend", default="toy", help="toy | echo | tcp://host:port | command line")
    t.add_argument("--mode", choices=("online", "offline"))
    t.add_argument("--scene-threshold", type=float)
    t.add_argument("--memory-window", type=int)
    t.add_argument("--keyframe-capacity", type=int)
    t.add_argument("--force-concept", action="store_true", help="invoke the concept path on every frame")
    t.add_argument("--no-concept", action="store_true", help="never invoke the concept path")
    t.add_argument("--keep-going", action="store_true", help="score failed frames as empty instead of aborting")
    t.add_argument("--timeout", type=float, default=30.0, help="seconds per backend request")
    t.add_argument("--config", help="TOML or JSON file overriding tracker settings")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True, help="root holding one prediction directory per video")
    e.add_argument("--gt", required=True, help="dataset root")
    e.add_argument("--scenes", default="auto", help="cuts JSON, or 'auto' to detect from frames")
    e.add_argument("--tolerance", default="auto", help="boundary tolerance in pixels, or 'auto'")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", required=True)
    e.add_argument("--csv", help="per-video CSV path (default: next to --out)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("stats", help="dataset statistics")
    s.add_argument("--dataset", required=True)
    s.add_argument("--threshold", type=float, default=0.35)
    s.add_argument("--h-bins", type=int, default=32)
    s.add_argument("--s-bins", type=int, default=32)
    s.add_argument("--fps", default="24", help="frame rate for videos without metadata, or 'none' to require it")
    s.add_argument("--out")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("scene", help="detect scene cuts in a frame directory")
    c.add_argument("--frames", required=True)
    c.add_argument("--threshold", type=float, default=0.35)
    c.add_argument("--h-bins", type=int, default=32)
    c.add_argument("--s-bins", type=int, default=32)
    c.add_argument("--out")
    c.set_defaults(func=cmd_scene)

    y = sub.add_parser("synth", help="write synthetic test videos")
    y.add_argument("--out", required=True)
    y.add_argument("--suite", choices=("acceptance", "toy", "late-concept"), default="acceptance")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--noise", type=int, default=2)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors; 2 is reserved for backend failures here
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BackendError as e:
        print(f"secvos: backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except (SecvosError, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"secvos: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
