"""Scene-adaptive tracker.

Every frame after the first goes through one shared scene-change detector.
Frames without a cut are segmented by the cheap pixel path from the memory
bank; frames with a cut go to the concept path, which also sees the keyframe
bank. Each object keeps its own memory and keyframe banks.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

from .backends.base import ConceptRequest, Endpoint, KeyframeItem, MemoryItem, PixelRequest
from .core import BinaryMask, ImageFrame, SegmentationRecord, mask_iou
from .errors import BackendError, DimensionMismatchError, ValidationError
from .keyframes import (
    DEFAULT_CAPACITY,
    DEFAULT_CONFIDENCE_THRESHOLD,
    DEFAULT_DIVERSITY_THRESHOLD,
    KeyframeBank,
    init_bank,
)
from .memory import DEFAULT_WINDOW, MemoryBank
from .scenedetect import DEFAULT_H_BINS, DEFAULT_S_BINS, DEFAULT_THRESHOLD, SceneChangeDetector, SceneList

log = logging.getLogger(__name__)

MODES = ("online", "offline")


@dataclass(frozen=True)
class TrackerConfig:
    scene_threshold: float = DEFAULT_THRESHOLD
    memory_window: int = DEFAULT_WINDOW
    keyframe_capacity: int = DEFAULT_CAPACITY
    diversity_threshold: float = DEFAULT_DIVERSITY_THRESHOLD
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    mode: str = "online"
    force_concept_every_frame: bool = False
    # "None" ablation: never call the concept path
    disable_concept: bool = False
    memory_reset: bool = True
    reset_iou: float = 0.5
    h_bins: int = DEFAULT_H_BINS
    s_bins: int = DEFAULT_S_BINS
    keep_going: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.memory_window < 1:
            raise ValidationError("memory_window must be >= 1")
        if self.keyframe_capacity < 0:
            raise ValidationError("keyframe_capacity must be >= 0")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError("confidence_threshold must lie in [0, 1]")
        if not 0.0 <= self.reset_iou <= 1.0:
            raise ValidationError("reset_iou must lie in [0, 1]")
        if self.force_concept_every_frame and self.disable_concept:
            raise ValidationError("force_concept_every_frame and disable_concept are exclusive")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base: "TrackerConfig | None" = None) -> "TrackerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown tracker config keys: {sorted(unknown)}")
        return replace(base or cls(), **dict(data))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunStats:
    # one decision per (tracked frame, object); frame 0 is supervision and not counted
    frames_total: int = 0
    concept_invocations: int = 0
    frame_durations: list[float] = field(default_factory=list)
    keyframes_admitted: int = 0
    memory_resets: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def concept_guidance_ratio(self) -> float:
        return self.concept_invocations / self.frames_total if self.frames_total else 0.0

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "frames_total": self.frames_total,
            "concept_invocations": self.concept_invocations,
            "concept_guidance_ratio": self.concept_guidance_ratio,
            "keyframes_admitted": self.keyframes_admitted,
            "memory_resets": self.memory_resets,
            "failures": list(self.failures),
        }
        if timings:
            out["frame_durations"] = list(self.frame_durations)
        return out

    @classmethod
    def combine(cls, parts: Sequence["RunStats"]) -> "RunStats":
        out = cls()
        for s in parts:
            out.frames_total += s.frames_total
            out.concept_invocations += s.concept_invocations
            out.frame_durations.extend(s.frame_durations)
            out.keyframes_admitted += s.keyframes_admitted
            out.memory_resets += s.memory_resets
            out.failures.extend(s.failures)
        return out


@dataclass
class TrackResult:
    records: dict[int, list[SegmentationRecord]]
    stats: RunStats
    scenes: SceneList
    banks: dict[int, KeyframeBank] = field(default_factory=dict, repr=False)
    pass_stats: tuple[RunStats, ...] = ()

    def masks(self) -> dict[int, list[BinaryMask]]:
        return {oid: [r.mask for r in recs] for oid, recs in self.records.items()}


def _memory_items(memory: MemoryBank, t: int) -> tuple[MemoryItem, ...]:
    return tuple(
        MemoryItem(e.frame_index, e.record.mask, e.record.presence_score, off)
        for e, off in memory.select_window(t)
    )


def _keyframe_items(bank: KeyframeBank) -> tuple[KeyframeItem, ...]:
    return tuple(KeyframeItem(k.frame_index, k.record.mask, k.is_anchor) for k in bank.contents())


def _validate_inputs(frames: Sequence[ImageFrame], first_masks: Mapping[int, BinaryMask]) -> None:
    if len(frames) == 0:
        raise ValidationError("video has no frames")
    if not first_masks:
        raise ValidationError("at least one first-frame mask is required")
    shape = frames[0].shape
    for oid, m in first_masks.items():
        if oid <= 0:
            raise ValidationError(f"object ids must be positive, got {oid}")
        if m.shape != shape:
            raise DimensionMismatchError(f"mask for object {oid} is {m.shape}, frames are {shape}")
        if m.is_empty():
            raise ValidationError(f"first-frame mask for object {oid} is empty")


def track_video(frames: Sequence[ImageFrame], first_masks: Mapping[int, BinaryMask],
                config: TrackerConfig, pixel_endpoint: Endpoint, concept_endpoint: Endpoint,
                frozen_banks: Mapping[int, KeyframeBank] | None = None) -> TrackResult:
    """Track every object through ``frames`` in a single online pass.

    With ``frozen_banks`` the given keyframe banks replace the ones built from
    frame 0 and are never updated (second pass of offline mode).
    """
    _validate_inputs(frames, first_masks)
    height, width = frames[0].shape
    object_ids = sorted(first_masks)
    detector = SceneChangeDetector(config.scene_threshold, config.h_bins, config.s_bins)
    stats = RunStats()
    cuts: list[int] = []

    records: dict[int, list[SegmentationRecord]] = {}
    memories: dict[int, MemoryBank] = {}
    banks: dict[int, KeyframeBank] = {}
    last_pixel: dict[int, SegmentationRecord] = {}
    first = frames[0]
    if first.frame_index != 0:
        first = ImageFrame(first.pixels, 0)
    detector.detect_change(first)
    for oid in object_ids:
        gt = SegmentationRecord(0, oid, first_masks[oid], 1.0, 1.0)
        records[oid] = [gt]
        memories[oid] = MemoryBank.from_record(gt, config.memory_window)
        if frozen_banks is not None:
            banks[oid] = frozen_banks[oid]
        else:
            banks[oid] = init_bank(first, first_masks[oid], oid, config.keyframe_capacity,
                                   config.diversity_threshold, config.confidence_threshold,
                                   config.h_bins, config.s_bins)
        last_pixel[oid] = gt

    for t in range(1, len(frames)):
        start = time.perf_counter()
        frame = frames[t]
        if frame.shape != (height, width):
            raise DimensionMismatchError(f"frame {t} is {frame.shape}, expected {(height, width)}")
        changed = detector.detect_change(frame)
        if changed:
            cuts.append(t)
        use_concept = not config.disable_concept and (changed or config.force_concept_every_frame)
        frame_hist = detector.prev_histogram
        for oid in object_ids:
            memory, bank = memories[oid], banks[oid]
            window = _memory_items(memory, t)
            stats.frames_total += 1
            try:
                if use_concept:
                    stats.concept_invocations += 1
                    rec = concept_endpoint.segment(
                        ConceptRequest(t, oid, _keyframe_items(bank), window))
                else:
                    rec = pixel_endpoint.segment(PixelRequest(t, oid, window))
            except BackendError as e:
                if not config.keep_going:
                    raise e.with_context(t, oid) from e
                log.warning("frame %d object %d: %s", t, oid, e)
                stats.failures.append({"frame_index": t, "object_id": oid, "error": str(e)})
                rec = SegmentationRecord.absent(t, oid, width, height)
            if rec.mask.shape != (height, width):
                raise DimensionMismatchError(f"backend mask for frame {t} is {rec.mask.shape}")

            if use_concept:
                # a present concept result far from the last pixel-path mask is a re-acquisition
                if (config.memory_reset and rec.presence_score > 0.0
                        and mask_iou(rec.mask, last_pixel[oid].mask) < config.reset_iou):
                    memory.reset_recents()
                    stats.memory_resets += 1
            else:
                last_pixel[oid] = rec
            memory.admit(rec)
            if not bank.frozen and bank.consider(frame, rec, histogram=frame_hist):
                stats.keyframes_admitted += 1
            records[oid].append(rec)
        stats.frame_durations.append(time.perf_counter() - start)

    return TrackResult(records, stats, SceneList(tuple(cuts)), banks, (stats,))


def track_offline(frames: Sequence[ImageFrame], first_masks: Mapping[int, BinaryMask],
                  config: TrackerConfig, pixel_endpoint: Endpoint,
                  concept_endpoint: Endpoint) -> TrackResult:
    """Two passes: build the keyframe banks online, freeze them, re-track with them."""
    first_pass = track_video(frames, first_masks, config, pixel_endpoint, concept_endpoint)
    frozen = {oid: bank.freeze() for oid, bank in first_pass.banks.items()}
    second_pass = track_video(frames, first_masks, config, pixel_endpoint, concept_endpoint,
                              frozen_banks=frozen)
    stats = RunStats.combine([first_pass.stats, second_pass.stats])
    return TrackResult(second_pass.records, stats, second_pass.scenes, frozen,
                       (first_pass.stats, second_pass.stats))


def track(frames: Sequence[ImageFrame], first_masks: Mapping[int, BinaryMask], config: TrackerConfig,
          pixel_endpoint: Endpoint, concept_endpoint: Endpoint) -> TrackResult:
    run = track_offline if config.mode == "offline" else track_video
    return run(frames, first_masks, config, pixel_endpoint, concept_endpoint)


def sweep_guidance_ratio(frames: Sequence[ImageFrame], first_masks: Mapping[int, BinaryMask],
                         gt_masks: Mapping[int, Sequence[BinaryMask]], thresholds: Sequence[float],
                         pixel_endpoint: Endpoint, concept_endpoint: Endpoint,
                         config: TrackerConfig | None = None,
                         tolerance: int | None = None) -> list[dict]:
    """One ``{threshold, ratio, J&F, J, F}`` row per scene threshold."""
    from .metrics import evaluate_video

    base = config or TrackerConfig()
    rows = []
    for thr in thresholds:
        cfg = replace(base, scene_threshold=float(thr))
        result = track(frames, first_masks, cfg, pixel_endpoint, concept_endpoint)
        ev = evaluate_video(result.masks(), gt_masks, tolerance)
        rows.append({
            "threshold": float(thr),
            "ratio": result.stats.concept_guidance_ratio,
            "J&F": ev.jf,
            "J": ev.j,
            "F": ev.f,
        })
    return rows
