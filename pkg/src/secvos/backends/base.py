"""Backend request types, frame access and the in-process endpoint."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from ..core import BinaryMask, ImageFrame, SegmentationRecord
from ..errors import BackendError, MissingFileError, ProtocolViolationError, SecvosError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".ppm")


@dataclass(frozen=True)
class MemoryItem:
    frame_index: int
    mask: BinaryMask
    presence_score: float
    offset: int


@dataclass(frozen=True)
class KeyframeItem:
    frame_index: int
    mask: BinaryMask
    is_anchor: bool


@dataclass(frozen=True)
class PixelRequest:
    frame_index: int
    object_id: int
    memory: tuple[MemoryItem, ...]

    op = "pixel"


@dataclass(frozen=True)
class ConceptRequest:
    frame_index: int
    object_id: int
    keyframes: tuple[KeyframeItem, ...]
    memory: tuple[MemoryItem, ...]

    op = "concept"


Request = PixelRequest | ConceptRequest


def validate_request(req: Request) -> None:
    if not req.memory:
        raise ProtocolViolationError("memory window must contain at least the anchor")
    if isinstance(req, ConceptRequest):
        if not req.keyframes:
            raise ProtocolViolationError("concept request carries no keyframes")
        idx = [k.frame_index for k in req.keyframes]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ProtocolViolationError("keyframes are not in temporal order")


def list_frame_files(directory: str | os.PathLike) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise MissingFileError(f"frames directory not found: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_rgb(path: str | os.PathLike, frame_index: int = 0) -> ImageFrame:
    from PIL import Image

    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError as e:
        raise MissingFileError(str(e)) from e
    return ImageFrame(arr, frame_index)


class FrameStore:
    """Index-addressed frame access backed by memory, a directory, or both.

    Frames loaded from disk are cached; ``put`` registers frames received
    inline over the wire.
    """

    def __init__(self, frames: Sequence[ImageFrame] | None = None,
                 directory: str | os.PathLike | None = None):
        self._cache: dict[int, ImageFrame] = {}
        self._files: list[Path] = list_frame_files(directory) if directory is not None else []
        for i, f in enumerate(frames or ()):
            self._cache[i] = f if f.frame_index == i else ImageFrame(f.pixels, i)

    def put(self, frame: ImageFrame) -> None:
        self._cache[frame.frame_index] = frame

    def __contains__(self, index: int) -> bool:
        return index in self._cache or 0 <= index < len(self._files)

    def __getitem__(self, index: int) -> ImageFrame:
        frame = self._cache.get(index)
        if frame is None:
            if not 0 <= index < len(self._files):
                raise KeyError(index)
            frame = read_rgb(self._files[index], index)
            self._cache[index] = frame
        return frame

    def __len__(self) -> int:
        return max(len(self._files), max(self._cache, default=-1) + 1)


class Endpoint(Protocol):
    role: str

    def segment(self, request: Request) -> SegmentationRecord: ...

    def close(self) -> None: ...


Matcher = Callable[[Request, FrameStore], SegmentationRecord]


class LocalEndpoint:
    """Runs a matcher function in-process against a frame store."""

    def __init__(self, matcher: Matcher, frames: FrameStore | Sequence[ImageFrame], role: str):
        self.matcher = matcher
        self.frames = frames if isinstance(frames, FrameStore) else FrameStore(frames)
        self.role = role

    def segment(self, request: Request) -> SegmentationRecord:
        validate_request(request)
        try:
            return self.matcher(request, self.frames)
        except BackendError:
            raise
        except (SecvosError, KeyError, ValueError) as e:
            raise BackendError(f"{self.role} backend failed: {e}") from e

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RecordingEndpoint:
    """Wraps an endpoint and keeps every request it forwards."""

    def __init__(self, inner: Endpoint):
        self.inner = inner
        self.role = inner.role
        self.requests: list[Request] = []

    def segment(self, request: Request) -> SegmentationRecord:
        self.requests.append(request)
        return self.inner.segment(request)

    def close(self) -> None:
        self.inner.close()
