"""Pixel-association memory: the anchor plus the freshest object-visible frames."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .core import SegmentationRecord
from .errors import OutOfOrderFrameError, ValidationError

DEFAULT_WINDOW = 22
PRESENCE_EPS = 1e-6


@dataclass(frozen=True)
class MemoryEntry:
    frame_index: int
    record: SegmentationRecord
    feature_handle: str | None = None
    is_anchor: bool = False


@dataclass
class MemoryBank:
    anchor: MemoryEntry
    window: int = DEFAULT_WINDOW
    recents: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1:
            raise ValidationError(f"memory window must be >= 1, got {self.window}")

    @classmethod
    def from_record(cls, record: SegmentationRecord, window: int = DEFAULT_WINDOW,
                    feature_handle: str | None = None) -> "MemoryBank":
        return cls(MemoryEntry(record.frame_index, record, feature_handle, is_anchor=True), window)

    def last_index(self) -> int:
        return self.recents[-1].frame_index if self.recents else self.anchor.frame_index

    def entries(self) -> list[MemoryEntry]:
        return [self.anchor, *self.recents]

    def admit(self, record: SegmentationRecord, feature_handle: str | None = None) -> bool:
        if record.frame_index <= self.last_index():
            raise OutOfOrderFrameError(
                f"frame {record.frame_index} is not after stored frame {self.last_index()}")
        if record.presence_score <= PRESENCE_EPS:
            return False
        self.recents.append(MemoryEntry(record.frame_index, record, feature_handle))
        while len(self.recents) > self.window - 1:
            self.recents.popleft()
        return True

    def select_window(self, current_frame_index: int) -> list[tuple[MemoryEntry, int]]:
        """Entries oldest to newest, each with its positive temporal offset."""
        if current_frame_index <= self.last_index():
            raise OutOfOrderFrameError(
                f"current frame {current_frame_index} is not after stored frame {self.last_index()}")
        return [(e, current_frame_index - e.frame_index) for e in self.entries()]

    def reset_recents(self) -> None:
        self.recents.clear()


def admit(bank: MemoryBank, record: SegmentationRecord) -> bool:
    return bank.admit(record)


def select_window(bank: MemoryBank, current_frame_index: int) -> list[tuple[MemoryEntry, int]]:
    return bank.select_window(current_frame_index)


def reset_recents(bank: MemoryBank) -> None:
    bank.reset_recents()
