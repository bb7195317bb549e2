"""Keyframe bank: the anchor frame plus a FIFO of diverse, confidently segmented frames."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .core import BinaryMask, ImageFrame, SegmentationRecord
from .errors import DimensionMismatchError, FrozenBankError, OutOfOrderFrameError, ValidationError
from .scenedetect import (
    DEFAULT_H_BINS,
    DEFAULT_S_BINS,
    HsHistogram,
    bhattacharyya_distance,
    compute_hs_histogram,
)

DEFAULT_CAPACITY = 6
DEFAULT_DIVERSITY_THRESHOLD = 0.2
DEFAULT_CONFIDENCE_THRESHOLD = 0.5


@dataclass(frozen=True)
class Keyframe:
    frame_index: int
    histogram: HsHistogram
    record: SegmentationRecord
    is_anchor: bool = False


@dataclass
class KeyframeBank:
    anchor: Keyframe
    capacity: int = DEFAULT_CAPACITY
    diversity_threshold: float = DEFAULT_DIVERSITY_THRESHOLD
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    h_bins: int = DEFAULT_H_BINS
    s_bins: int = DEFAULT_S_BINS
    recents: deque = field(default_factory=deque)
    frozen: bool = False

    def __post_init__(self):
        if self.capacity < 0:
            raise ValidationError(f"capacity must be >= 0, got {self.capacity}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError("confidence_threshold must lie in [0, 1]")

    def contents(self) -> list[Keyframe]:
        return [self.anchor, *self.recents]

    def last_index(self) -> int:
        return self.recents[-1].frame_index if self.recents else self.anchor.frame_index

    def min_distance(self, histogram: HsHistogram) -> float:
        return min(bhattacharyya_distance(histogram, kf.histogram) for kf in self.contents())

    def consider(self, frame: ImageFrame, record: SegmentationRecord,
                 histogram: HsHistogram | None = None) -> bool:
        """Admit ``frame`` if it is novel and confidently segmented.

        ``histogram`` may be passed when the caller already has the full-frame
        histogram at this bank's bin geometry.
        """
        if self.frozen:
            raise FrozenBankError("keyframe bank is frozen")
        if record.frame_index <= self.last_index():
            raise OutOfOrderFrameError(
                f"frame {record.frame_index} is not after stored frame {self.last_index()}")
        if (record.confidence < self.confidence_threshold or record.presence_score <= 0.0
                or record.mask.is_empty()):
            return False
        if histogram is None:
            histogram = compute_hs_histogram(frame, self.h_bins, self.s_bins)
        if self.min_distance(histogram) <= self.diversity_threshold:
            return False
        self.recents.append(Keyframe(record.frame_index, histogram, record))
        while len(self.recents) > self.capacity:
            self.recents.popleft()
        return True

    def freeze(self) -> "KeyframeBank":
        self.frozen = True
        return self


def init_bank(first_frame: ImageFrame, first_mask: BinaryMask, object_id: int = 1,
              capacity: int = DEFAULT_CAPACITY,
              diversity_threshold: float = DEFAULT_DIVERSITY_THRESHOLD,
              confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
              h_bins: int = DEFAULT_H_BINS, s_bins: int = DEFAULT_S_BINS) -> KeyframeBank:
    if first_mask.shape != first_frame.shape:
        raise DimensionMismatchError(
            f"mask {first_mask.shape} does not match frame {first_frame.shape}")
    record = SegmentationRecord(first_frame.frame_index, object_id, first_mask, 1.0, 1.0)
    anchor = Keyframe(first_frame.frame_index,
                      compute_hs_histogram(first_frame, h_bins, s_bins), record, is_anchor=True)
    return KeyframeBank(anchor, capacity, diversity_threshold, confidence_threshold, h_bins, s_bins)


def consider(bank: KeyframeBank, frame: ImageFrame, record: SegmentationRecord) -> bool:
    return bank.consider(frame, record)


def contents(bank: KeyframeBank) -> list[Keyframe]:
    return bank.contents()


def freeze(bank: KeyframeBank) -> KeyframeBank:
    return bank.freeze()
