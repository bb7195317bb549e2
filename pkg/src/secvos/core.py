"""Frame and mask value types, the RLE codec and pixel-level mask operations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionMismatchError, MalformedRunLengthError, ValidationError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = arr.view()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ImageFrame:
    """An RGB8 video frame stored as an ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValidationError(f"frame pixels must be uint8, got {px.dtype}")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"frame pixels must have shape (h, w, 3), got {px.shape}")
        if px.shape[0] <= 0 or px.shape[1] <= 0:
            raise ValidationError("frame must have positive width and height")
        object.__setattr__(self, "pixels", _frozen(np.ascontiguousarray(px)))

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes, frame_index: int = 0) -> "ImageFrame":
        if len(data) != width * height * 3:
            raise ValidationError(
                f"pixel buffer has {len(data)} bytes, expected {width * height * 3}"
            )
        arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
        return cls(arr, frame_index)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """A single-object mask; ``bits`` is a boolean ``(height, width)`` array."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {b.shape}")
        if b.shape[0] <= 0 or b.shape[1] <= 0:
            raise ValidationError("mask must have positive width and height")
        object.__setattr__(self, "bits", _frozen(np.ascontiguousarray(b, dtype=bool)))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_box(cls, width: int, height: int, y: int, x: int, h: int, w: int) -> "BinaryMask":
        bits = np.zeros((height, width), dtype=bool)
        bits[max(y, 0):max(y + h, 0), max(x, 0):max(x + w, 0)] = True
        return cls(bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def is_empty(self) -> bool:
        return not self.bits.any()

    def bbox(self) -> tuple[int, int, int, int] | None:
        """Return ``(y, x, h, w)`` of the object pixels, or None for an empty mask."""
        rows = np.flatnonzero(self.bits.any(axis=1))
        if rows.size == 0:
            return None
        cols = np.flatnonzero(self.bits.any(axis=0))
        y0, y1 = int(rows[0]), int(rows[-1])
        x0, x1 = int(cols[0]), int(cols[-1])
        return y0, x0, y1 - y0 + 1, x1 - x0 + 1

    def translated(self, dy: int, dx: int) -> "BinaryMask":
        """Shift by ``(dy, dx)``; pixels leaving the frame are dropped."""
        h, w = self.bits.shape
        out = np.zeros_like(self.bits)
        src_y = slice(max(0, -dy), min(h, h - dy))
        src_x = slice(max(0, -dx), min(w, w - dx))
        dst_y = slice(max(0, dy), min(h, h + dy))
        dst_x = slice(max(0, dx), min(w, w + dx))
        if src_y.start < src_y.stop and src_x.start < src_x.stop:
            out[dst_y, dst_x] = self.bits[src_y, src_x]
        return BinaryMask(out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.bits.shape, np.packbits(self.bits).tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area()})"


@dataclass(frozen=True)
class RleMask:
    """Column-major run lengths, starting with a (possibly empty) background run."""

    width: int
    height: int
    runs: tuple[int, ...]

    def to_json(self) -> dict[str, Any]:
        return {"w": self.width, "h": self.height, "runs": list(self.runs)}

    @classmethod
    def from_json(cls, obj: Any) -> "RleMask":
        try:
            w, h, runs = obj["w"], obj["h"], obj["runs"]
        except (KeyError, TypeError) as e:
            raise MalformedRunLengthError(f"bad RLE object: {obj!r}") from e
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (w, h, *runs)):
            raise MalformedRunLengthError("RLE fields must be integers")
        return cls(w, h, tuple(runs))


@dataclass(frozen=True)
class SegmentationRecord:
    """A backend's answer for one object on one frame."""

    frame_index: int
    object_id: int
    mask: BinaryMask
    presence_score: float
    confidence: float

    def __post_init__(self):
        if self.object_id <= 0:
            raise ValidationError(f"object id must be positive, got {self.object_id}")
        for name in ("presence_score", "confidence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.presence_score == 0.0 and not self.mask.is_empty():
            raise ValidationError("a record with presence_score 0 must carry an empty mask")

    @classmethod
    def absent(cls, frame_index: int, object_id: int, width: int, height: int,
               confidence: float = 0.0) -> "SegmentationRecord":
        return cls(frame_index, object_id, BinaryMask.empty(width, height), 0.0, confidence)


def rle_encode(mask: BinaryMask) -> RleMask:
    flat = mask.bits.ravel(order="F")
    # indices where the value flips, with virtual boundaries at both ends
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return RleMask(mask.width, mask.height, tuple(runs))


def rle_decode(rle: RleMask) -> BinaryMask:
    w, h = rle.width, rle.height
    if w <= 0 or h <= 0:
        raise MalformedRunLengthError(f"invalid RLE dimensions {w}x{h}")
    runs = np.asarray(rle.runs, dtype=np.int64)
    if runs.size and runs.min() < 0:
        raise MalformedRunLengthError("negative run length")
    total = int(runs.sum())
    if total != w * h:
        raise MalformedRunLengthError(f"runs sum to {total}, expected {w * h}")
    values = np.arange(runs.size) % 2 == 1
    flat = np.repeat(values, runs)
    return BinaryMask(flat.reshape((h, w), order="F"))


def _check_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks score 1.0."""
    _check_same_shape(a, b)
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union


def boundary_map(mask: BinaryMask) -> BinaryMask:
    """Object pixels with a 4-connected neighbour outside the object or the frame."""
    m = mask.bits
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return BinaryMask(m & ~interior)
