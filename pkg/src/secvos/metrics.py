"""Region similarity (J), boundary F-measure (F), J&F aggregation and dataset statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import BinaryMask, boundary_map, mask_iou
from .errors import DimensionMismatchError, MissingFpsError, MissingSceneListError, ValidationError
from .scenedetect import DEFAULT_H_BINS, DEFAULT_S_BINS, DEFAULT_THRESHOLD, SceneList, segment_scenes

BUCKETS = ("no-change", "single-change", "multi-change")
BOUNDARY_TOLERANCE_FRACTION = 0.008


def bucket_of(cut_count: int) -> str:
    if cut_count <= 0:
        return "no-change"
    return "single-change" if cut_count == 1 else "multi-change"


def default_tolerance(width: int, height: int) -> int:
    return max(1, int(round(BOUNDARY_TOLERANCE_FRACTION * math.hypot(width, height))))


@dataclass(frozen=True)
class FrameEval:
    j: float
    f: float
    both_empty: bool = False


def region_similarity(pred: BinaryMask, gt: BinaryMask) -> float:
    return mask_iou(pred, gt)


def contour_accuracy(pred: BinaryMask, gt: BinaryMask, tolerance: int | None = None) -> float:
    """Boundary F-measure with boundary pixels matched within a Chebyshev radius."""
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    p_empty, g_empty = pred.is_empty(), gt.is_empty()
    if p_empty and g_empty:
        return 1.0
    if p_empty or g_empty:
        return 0.0
    if tolerance is None:
        tolerance = default_tolerance(gt.width, gt.height)
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    bp = boundary_map(pred).bits
    bg = boundary_map(gt).bits
    bg_zone = kernels.dilate_square(bg, tolerance)
    bp_zone = kernels.dilate_square(bp, tolerance)
    precision = np.count_nonzero(bp & bg_zone) / np.count_nonzero(bp)
    recall = np.count_nonzero(bg & bp_zone) / np.count_nonzero(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate_frame(pred: BinaryMask, gt: BinaryMask, tolerance: int | None = None) -> FrameEval:
    both_empty = pred.is_empty() and gt.is_empty()
    return FrameEval(region_similarity(pred, gt), contour_accuracy(pred, gt, tolerance), both_empty)


@dataclass
class VideoEval:
    name: str
    j: float
    f: float
    per_object: dict[int, dict[str, float]] = field(default_factory=dict)
    scene_change_count: int = 0

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2

    def row(self) -> dict[str, Any]:
        return {
            "video": self.name,
            "scene_changes": self.scene_change_count,
            "bucket": bucket_of(self.scene_change_count),
            "J&F": self.jf,
            "J": self.j,
            "F": self.f,
        }


def evaluate_video(preds: Mapping[int, Sequence[BinaryMask]], gts: Mapping[int, Sequence[BinaryMask]],
                   tolerance: int | None = None, name: str = "", scene_change_count: int = 0) -> VideoEval:
    """Average per-frame J and F over frames ``1..N-1`` per object, then over objects.

    Frame 0 is the supervision and is not scored. Objects missing from
    ``preds`` are scored as empty predictions.
    """
    if not gts:
        raise ValidationError("no ground-truth objects to evaluate")
    per_object: dict[int, dict[str, float]] = {}
    for oid in sorted(gts):
        gt_seq = gts[oid]
        pred_seq = preds.get(oid)
        if pred_seq is None:
            pred_seq = [BinaryMask.empty(m.width, m.height) for m in gt_seq]
        if len(pred_seq) != len(gt_seq):
            raise ValidationError(
                f"object {oid}: {len(pred_seq)} predicted frames vs {len(gt_seq)} ground-truth frames")
        if len(gt_seq) < 2:
            raise ValidationError(f"object {oid}: need at least 2 frames to score (frame 0 is given)")
        evals = [evaluate_frame(p, g, tolerance) for p, g in zip(pred_seq[1:], gt_seq[1:])]
        j = float(np.mean([e.j for e in evals]))
        f = float(np.mean([e.f for e in evals]))
        per_object[oid] = {"J": j, "F": f, "J&F": (j + f) / 2}
    j = float(np.mean([v["J"] for v in per_object.values()]))
    f = float(np.mean([v["F"] for v in per_object.values()]))
    return VideoEval(name, j, f, per_object, scene_change_count)


def _summary(evals: Sequence[VideoEval]) -> dict[str, float] | None:
    if not evals:
        return None
    j = float(np.mean([e.j for e in evals]))
    f = float(np.mean([e.f for e in evals]))
    return {"J&F": float(np.mean([e.jf for e in evals])), "J": j, "F": f, "videos": len(evals)}


@dataclass
class BenchmarkReport:
    overall: dict[str, float]
    buckets: dict[str, dict[str, float] | None]
    videos: list[dict[str, Any]]
    stats: dict[str, Any] | None = None

    def to_json(self) -> dict[str, Any]:
        out = {"overall": self.overall, "buckets": self.buckets, "videos": self.videos}
        if self.stats is not None:
            out["stats"] = self.stats
        return out

    def summary_row(self) -> dict[str, Any]:
        """Bucketed J&F/J/F then overall J&F, in the benchmark table's column order."""
        row: dict[str, Any] = {}
        for b in BUCKETS:
            s = self.buckets.get(b)
            for k in ("J&F", "J", "F"):
                row[f"{b} {k}"] = None if s is None else s[k]
        row["overall J&F"] = self.overall["J&F"]
        return row


def bucket_report(video_evals: Sequence[VideoEval],
                  scene_lists: Mapping[str, SceneList] | Sequence[SceneList],
                  stats: dict[str, Any] | None = None) -> BenchmarkReport:
    if not video_evals:
        raise ValidationError("no videos to report")
    if isinstance(scene_lists, Mapping):
        try:
            lists = [scene_lists[v.name] for v in video_evals]
        except KeyError as e:
            raise MissingSceneListError(f"no scene list for video {e.args[0]!r}") from e
    else:
        lists = list(scene_lists)
        if len(lists) != len(video_evals):
            raise MissingSceneListError(
                f"{len(lists)} scene lists for {len(video_evals)} videos")
    groups: dict[str, list[VideoEval]] = {b: [] for b in BUCKETS}
    rows = []
    for ev, sl in zip(video_evals, lists):
        ev.scene_change_count = len(sl.cut_indices)
        groups[bucket_of(ev.scene_change_count)].append(ev)
        rows.append(ev.row())
    return BenchmarkReport(_summary(video_evals), {b: _summary(g) for b, g in groups.items()}, rows, stats)


def object_disappears(seq: Sequence[BinaryMask]) -> bool:
    seen = False
    for m in seq:
        empty = m.is_empty()
        if seen and empty:
            return True
        seen = seen or not empty
    return False


def disappearance_rate(gt_sequences: Iterable[Sequence[BinaryMask]]) -> float:
    flags = [object_disappears(seq) for seq in gt_sequences]
    if not flags:
        raise ValidationError("disappearance rate needs at least one object")
    return sum(flags) / len(flags)


def dataset_stats(videos: Iterable[Any], threshold: float = DEFAULT_THRESHOLD,
                  h_bins: int = DEFAULT_H_BINS, s_bins: int = DEFAULT_S_BINS) -> dict[str, Any]:
    """Video count, mean duration, disappearance rate and mean scene count.

    Each video must expose ``frames``, ``gt`` (object id -> mask sequence) and ``fps``.
    """
    durations, scene_counts, objects = [], [], []
    for v in videos:
        if v.fps is None or not v.fps > 0:
            raise MissingFpsError(f"video {getattr(v, 'name', '?')!r} has no frame rate")
        durations.append(len(v.frames) / v.fps)
        scene_counts.append(segment_scenes(v.frames, threshold, h_bins, s_bins).scene_count)
        objects.extend(v.gt.values())
    if not durations:
        raise ValidationError("dataset has no videos")
    return {
        "video_count": len(durations),
        "avg_duration_s": float(np.mean(durations)),
        "disappearance_rate": disappearance_rate(objects) if objects else 0.0,
        "avg_scene_count": float(np.mean(scene_counts)),
    }
