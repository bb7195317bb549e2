"""Dataset layout, palette annotations and prediction persistence.

Layout (DAVIS style)::

    root/JPEGImages/<video>/00000.jpg ...   frames, filename order = time order
    root/Annotations/<video>/00000.png ...  indexed-palette label maps (0 = background)
    root/meta.json                          optional {"videos": {<video>: {"fps": .., "objects": [..]}}}
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .backends.base import list_frame_files, read_rgb
from .core import BinaryMask, ImageFrame
from .errors import (
    DimensionMismatchError,
    MissingFileError,
    MissingSceneListError,
    UnknownObjectIdError,
    ValidationError,
)

DEFAULT_FPS = 24.0
FRAMES_SUBDIR = "JPEGImages"
ANNOTATIONS_SUBDIR = "Annotations"
META_FILE = "meta.json"


def palette(n: int = 256) -> list[int]:
    """The PASCAL VOC / DAVIS colour map as a flat ``[r, g, b, ...]`` list."""
    out = []
    for i in range(n):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        out.extend((r, g, b))
    return out


_PALETTE = palette()


def read_label_map(path: str | os.PathLike) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as img:
            if img.mode not in ("P", "L", "I;16", "I"):
                raise ValidationError(f"{path}: annotation must be an indexed or grayscale image, got {img.mode}")
            return np.asarray(img).astype(np.int64)
    except FileNotFoundError as e:
        raise MissingFileError(str(e)) from e


def write_label_map(path: str | os.PathLike, labels: np.ndarray) -> None:
    from PIL import Image

    labels = np.asarray(labels)
    if labels.max(initial=0) > 255:
        raise ValidationError("palette images hold at most 255 objects")
    img = Image.fromarray(labels.astype(np.uint8), "P")
    img.putpalette(_PALETTE)
    img.save(path, format="PNG")


def compose_labels(masks: Mapping[int, BinaryMask], shape: tuple[int, int]) -> np.ndarray:
    """Object-id label map; where objects overlap the higher id wins."""
    labels = np.zeros(shape, dtype=np.int64)
    for oid in sorted(masks):
        labels[masks[oid].bits] = oid
    return labels


def split_labels(labels: np.ndarray, object_ids: Iterable[int]) -> dict[int, BinaryMask]:
    return {oid: BinaryMask(labels == oid) for oid in object_ids}


@dataclass
class VideoData:
    name: str
    frames: list[ImageFrame]
    gt: dict[int, list[BinaryMask]]
    fps: float | None
    fps_defaulted: bool = False
    frame_names: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class DatasetLayout:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    def frames_dir(self, video: str) -> Path:
        return self.root / FRAMES_SUBDIR / video

    def annotations_dir(self, video: str) -> Path:
        return self.root / ANNOTATIONS_SUBDIR / video

    def meta(self) -> dict[str, Any]:
        p = self.root / META_FILE
        if not p.exists():
            return {}
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
        return data.get("videos", {}) if isinstance(data, dict) else {}

    def videos(self) -> list[str]:
        d = self.root / FRAMES_SUBDIR
        if not d.is_dir():
            raise MissingFileError(f"no {FRAMES_SUBDIR} directory under {self.root}")
        return sorted(p.name for p in d.iterdir() if p.is_dir())


def load_frames(directory: str | os.PathLike) -> tuple[list[ImageFrame], list[str]]:
    files = list_frame_files(directory)
    if not files:
        raise MissingFileError(f"no frames in {directory}")
    return [read_rgb(p, i) for i, p in enumerate(files)], [p.stem for p in files]


def load_label_sequence(directory: str | os.PathLike, names: Sequence[str] | None = None) -> list[np.ndarray]:
    d = Path(directory)
    if names is None:
        files = sorted(p for p in d.glob("*.png")) if d.is_dir() else []
        if not files:
            raise MissingFileError(f"no annotations in {d}")
    else:
        files = [d / f"{n}.png" for n in names]
        missing = [str(p) for p in files if not p.exists()]
        if missing:
            raise MissingFileError(f"missing annotation files: {missing[:3]}{'...' if len(missing) > 3 else ''}")
    return [read_label_map(p) for p in files]


def labels_to_objects(label_maps: Sequence[np.ndarray], object_ids: Iterable[int] | None = None
                      ) -> dict[int, list[BinaryMask]]:
    present = sorted(set().union(*(np.unique(m).tolist() for m in label_maps)) - {0})
    if object_ids is None:
        ids = present
    else:
        ids = sorted(int(i) for i in object_ids)
        unknown = sorted(set(present) - set(ids))
        if unknown:
            raise UnknownObjectIdError(f"annotation ids {unknown} are not in the object list {ids}")
    return {oid: [BinaryMask(m == oid) for m in label_maps] for oid in ids}


def load_video(layout: DatasetLayout, video: str, default_fps: float | None = DEFAULT_FPS) -> VideoData:
    meta = layout.meta().get(video, {})
    frames, names = load_frames(layout.frames_dir(video))
    labels = load_label_sequence(layout.annotations_dir(video), names)
    for name, f, lab in zip(names, frames, labels):
        if lab.shape != f.shape:
            raise DimensionMismatchError(f"{video}/{name}: annotation {lab.shape} vs frame {f.shape}")
    gt = labels_to_objects(labels, meta.get("objects"))
    fps = meta.get("fps")
    defaulted = fps is None and default_fps is not None
    return VideoData(video, frames, gt, float(fps) if fps is not None else default_fps, defaulted, names)


def iter_videos(layout: DatasetLayout, default_fps: float | None = DEFAULT_FPS):
    for name in layout.videos():
        yield load_video(layout, name, default_fps)


def write_predictions(result, out_dir: str | os.PathLike, frame_names: Sequence[str] | None = None,
                      extra_stats: Mapping[str, Any] | None = None, timings: bool = True) -> Path:
    """One palette PNG per frame plus ``stats.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    oids = sorted(result.records)
    n = len(result.records[oids[0]])
    shape = result.records[oids[0]][0].mask.shape
    names = list(frame_names) if frame_names is not None else [f"{t:05d}" for t in range(n)]
    if len(names) != n:
        raise ValidationError(f"{len(names)} frame names for {n} frames")
    for t in range(n):
        labels = compose_labels({oid: result.records[oid][t].mask for oid in oids}, shape)
        write_label_map(out / f"{names[t]}.png", labels)
    stats = result.stats.to_dict(timings=timings)
    stats["scenes"] = result.scenes.to_json()
    if len(result.pass_stats) > 1:
        stats["passes"] = [s.to_dict(timings=timings) for s in result.pass_stats]
    if extra_stats:
        stats.update(extra_stats)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def load_predictions(pred_dir: str | os.PathLike, object_ids: Iterable[int] | None = None,
                     names: Sequence[str] | None = None) -> dict[int, list[BinaryMask]]:
    labels = load_label_sequence(pred_dir, names)
    ids = sorted(set().union(*(np.unique(m).tolist() for m in labels)) - {0}) if object_ids is None else object_ids
    return {oid: [BinaryMask(m == oid) for m in labels] for oid in ids}


def _eval_one(args):
    from .metrics import evaluate_video
    from .scenedetect import SceneList, segment_scenes

    name, pred_dir, gt_root, tolerance, scenes = args
    layout = DatasetLayout(gt_root)
    video = load_video(layout, name)
    preds = load_predictions(pred_dir, video.gt.keys(), video.frame_names)
    if scenes is None:
        scene_list = segment_scenes(video.frames)
    else:
        scene_list = SceneList(tuple(scenes))
    ev = evaluate_video(preds, video.gt, tolerance, name, len(scene_list.cut_indices))
    stats = None
    stats_path = Path(pred_dir) / "stats.json"
    if stats_path.exists():
        with open(stats_path, encoding="utf-8") as fh:
            stats = json.load(fh)
    return ev, scene_list, stats


def evaluate_dataset(pred_root: str | os.PathLike, gt_root: str | os.PathLike,
                     scenes: Mapping[str, Sequence[int]] | None = None, tolerance: int | None = None,
                     workers: int = 1, videos: Sequence[str] | None = None):
    """Score every video under ``pred_root/<video>`` against ``gt_root``.

    Videos are evaluated in parallel when ``workers > 1``; results are reduced
    in sorted video order, so the report does not depend on scheduling.
    """
    from .metrics import bucket_report

    layout = DatasetLayout(gt_root)
    names = sorted(videos) if videos is not None else layout.videos()
    jobs = []
    for name in names:
        pred_dir = Path(pred_root) / name
        if not pred_dir.is_dir():
            raise MissingFileError(f"no predictions for video {name!r} in {pred_root}")
        cuts = None
        if scenes is not None:
            if name not in scenes:
                raise MissingSceneListError(f"no scene list for video {name!r}")
            cuts = list(scenes[name])
        jobs.append((name, str(pred_dir), str(gt_root), tolerance, cuts))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_eval_one, jobs))
    else:
        results = [_eval_one(j) for j in jobs]
    evals = [r[0] for r in results]
    lists = {r[0].name: r[1] for r in results}
    run_stats = [r[2] for r in results if r[2] is not None]
    agg = None
    if run_stats:
        frames_total = sum(s.get("frames_total", 0) for s in run_stats)
        inv = sum(s.get("concept_invocations", 0) for s in run_stats)
        agg = {
            "frames_total": frames_total,
            "concept_invocations": inv,
            "concept_guidance_ratio": inv / frames_total if frames_total else 0.0,
            "keyframes_admitted": sum(s.get("keyframes_admitted", 0) for s in run_stats),
            "memory_resets": sum(s.get("memory_resets", 0) for s in run_stats),
        }
    return bucket_report(evals, lists, agg)
