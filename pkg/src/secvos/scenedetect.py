"""Hue-saturation histograms and Bhattacharyya-distance scene-cut detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .core import ImageFrame
from .errors import (
    EmptyFrameError,
    GeometryMismatchError,
    NotNormalizedError,
    ValidationError,
)

DEFAULT_THRESHOLD = 0.35
DEFAULT_H_BINS = 32
DEFAULT_S_BINS = 32

_NORM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class HsHistogram:
    """L1-normalised 2-D histogram over (hue bin, saturation bin)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValidationError(f"histogram must be 2-D, got shape {w.shape}")
        if (w < 0).any():
            raise ValidationError("histogram weights must be non-negative")
        w = w.view()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def h_bins(self) -> int:
        return self.weights.shape[0]

    @property
    def s_bins(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def from_counts(cls, counts: np.ndarray, h_bins: int, s_bins: int) -> "HsHistogram":
        total = counts.sum()
        if total == 0:
            raise EmptyFrameError("cannot normalise a histogram with no pixels")
        return cls((counts / total).reshape(h_bins, s_bins))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HsHistogram):
            return NotImplemented
        return self.weights.shape == other.weights.shape and bool(
            np.array_equal(self.weights, other.weights))

    __hash__ = None  # type: ignore[assignment]


def rgb_to_hs(r: int, g: int, b: int) -> tuple[float, float]:
    """Hue in degrees ``[0, 360)`` and saturation in ``[0, 1]`` of an RGB8 pixel."""
    mx, mn = max(r, g, b), min(r, g, b)
    d = mx - mn
    if d == 0:
        hue = 0.0
    elif mx == r:
        hue = 60.0 * (g - b) / d
        if hue < 0.0:
            hue += 360.0
    elif mx == g:
        hue = 60.0 * (b - r) / d + 120.0
    else:
        hue = 60.0 * (r - g) / d + 240.0
    sat = d / mx if mx > 0 else 0.0
    return hue, sat


def hs_bin_of(r: int, g: int, b: int, h_bins: int = DEFAULT_H_BINS,
              s_bins: int = DEFAULT_S_BINS) -> tuple[int, int]:
    """(hue bin, saturation bin) of one pixel, using the kernels' exact integer rule."""
    px = np.array([[[r, g, b]]], dtype=np.uint8)
    flat = int(kernels.hs_bin_map(px, h_bins, s_bins)[0, 0])
    return divmod(flat, s_bins)


def _region_pixels(frame: ImageFrame | np.ndarray) -> np.ndarray:
    return frame.pixels if isinstance(frame, ImageFrame) else np.asarray(frame)


def compute_hs_histogram(frame: ImageFrame | np.ndarray, h_bins: int = DEFAULT_H_BINS,
                         s_bins: int = DEFAULT_S_BINS,
                         mask: np.ndarray | None = None) -> HsHistogram:
    """Histogram of a whole frame, or of the pixels selected by ``mask``."""
    if h_bins <= 0 or s_bins <= 0:
        raise ValidationError("bin counts must be positive")
    pixels = _region_pixels(frame)
    if pixels.size == 0:
        raise EmptyFrameError("frame has no pixels")
    binmap = kernels.hs_bin_map(pixels, h_bins, s_bins)
    if mask is not None:
        binmap = binmap[np.asarray(mask, dtype=bool)]
        if binmap.size == 0:
            raise EmptyFrameError("mask selects no pixels")
    counts = np.bincount(binmap.ravel(), minlength=h_bins * s_bins)
    return HsHistogram.from_counts(counts, h_bins, s_bins)


def bhattacharyya_coefficient(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sqrt(p * q).sum())


def bhattacharyya_distance(p: HsHistogram, q: HsHistogram) -> float:
    """``sqrt(1 - sum_i sqrt(p_i q_i))`` for L1-normalised histograms."""
    if p.weights.shape != q.weights.shape:
        raise GeometryMismatchError(
            f"histogram geometries differ: {p.weights.shape} vs {q.weights.shape}")
    for h in (p, q):
        s = float(h.weights.sum())
        if abs(s - 1.0) > _NORM_TOL:
            raise NotNormalizedError(f"histogram sums to {s!r}, not 1")
    # 1 - BC == sum((sqrt p - sqrt q)^2) / 2 for normalised inputs; the squared-difference
    # form avoids cancellation, so identical histograms give exactly 0
    diff = np.sqrt(p.weights) - np.sqrt(q.weights)
    return min(1.0, math.sqrt(0.5 * float(np.dot(diff.ravel(), diff.ravel()))))


@dataclass
class SceneChangeDetector:
    """Stateful detector comparing each frame with the one before it.

    ``threshold`` is normally in (0, 1); values outside that range are accepted
    so that threshold sweeps can express "never" (>= 1) and "always" (< 0).
    """

    threshold: float = DEFAULT_THRESHOLD
    h_bins: int = DEFAULT_H_BINS
    s_bins: int = DEFAULT_S_BINS
    prev_histogram: HsHistogram | None = field(default=None, repr=False)
    last_distance: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValidationError(f"threshold must be finite, got {self.threshold}")
        if self.h_bins <= 0 or self.s_bins <= 0:
            raise ValidationError("bin counts must be positive")

    def detect_change(self, frame: ImageFrame | np.ndarray) -> bool:
        hist = compute_hs_histogram(frame, self.h_bins, self.s_bins)
        prev, self.prev_histogram = self.prev_histogram, hist
        if prev is None:
            self.last_distance = None
            return False
        self.last_distance = bhattacharyya_distance(prev, hist)
        return self.last_distance > self.threshold

    def reset(self) -> None:
        self.prev_histogram = None
        self.last_distance = None


@dataclass(frozen=True)
class SceneList:
    cut_indices: tuple[int, ...] = ()

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cut_indices)
        if any(c < 1 for c in cuts) or any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValidationError(f"cut indices must be strictly increasing and >= 1: {cuts}")
        object.__setattr__(self, "cut_indices", cuts)

    @property
    def scene_count(self) -> int:
        return len(self.cut_indices) + 1

    def to_json(self) -> dict:
        return {"cuts": list(self.cut_indices), "scene_count": self.scene_count}

    @classmethod
    def from_json(cls, obj: dict) -> "SceneList":
        try:
            return cls(tuple(obj["cuts"]))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"bad scene list: {obj!r}") from e


def segment_scenes(frames: Iterable[ImageFrame | np.ndarray], threshold: float = DEFAULT_THRESHOLD,
                   h_bins: int = DEFAULT_H_BINS, s_bins: int = DEFAULT_S_BINS) -> SceneList:
    detector = SceneChangeDetector(threshold, h_bins, s_bins)
    cuts = []
    n = 0
    for i, frame in enumerate(frames):
        n += 1
        if detector.detect_change(frame):
            cuts.append(i)
    if n == 0:
        raise ValidationError("cannot segment an empty frame sequence")
    return SceneList(tuple(cuts))
