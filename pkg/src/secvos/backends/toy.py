"""Deterministic toy backends used for desk-scale end-to-end runs.

The pixel matcher is a bounded SSD template search around the last known
location; the concept matcher re-detects the object anywhere in the frame by
comparing window hue/saturation histograms with a descriptor pooled over the
keyframes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..core import BinaryMask, SegmentationRecord
from ..errors import ProtocolViolationError
from ..scenedetect import compute_hs_histogram
from .base import ConceptRequest, FrameStore, PixelRequest

DEFAULT_RADIUS = 16
DEFAULT_TAU_PIX = 1500.0
DEFAULT_TAU_CON = 0.6
CONCEPT_BINS = 32


def pick_offset(scores: np.ndarray, dys: np.ndarray, dxs: np.ndarray,
                valid: np.ndarray) -> int | None:
    """Index of the best candidate: lowest score, then smallest squared
    translation magnitude, then lexicographic ``(dy, dx)``. None if nothing is valid."""
    idx = np.flatnonzero(valid.ravel())
    if idx.size == 0:
        return None
    s = scores.ravel()[idx]
    dy = dys.ravel()[idx]
    dx = dxs.ravel()[idx]
    order = np.lexsort((dx, dy, dy * dy + dx * dx, s))
    return int(idx[order[0]])


def _check_dims(mask: BinaryMask, shape: tuple[int, int]) -> None:
    if mask.shape != shape:
        raise ProtocolViolationError(f"mask shape {mask.shape} does not match frame {shape}")


@dataclass(frozen=True)
class ToyPixelMatcher:
    radius: int = DEFAULT_RADIUS
    tau: float = DEFAULT_TAU_PIX

    def __call__(self, req: PixelRequest, frames: FrameStore) -> SegmentationRecord:
        if not isinstance(req, PixelRequest):
            raise ProtocolViolationError(f"pixel backend cannot serve {req.op!r} requests")
        cur = frames[req.frame_index]
        h_img, w_img = cur.shape
        src = next((m for m in reversed(req.memory) if not m.mask.is_empty()), None)
        if src is None:
            return SegmentationRecord.absent(req.frame_index, req.object_id, w_img, h_img)
        _check_dims(src.mask, cur.shape)
        y, x, h, w = src.mask.bbox()
        template = frames[src.frame_index].pixels[y:y + h, x:x + w]
        sums = kernels.ssd_scores(cur.pixels, template, y, x, self.radius)
        offs = np.arange(-self.radius, self.radius + 1)
        dys, dxs = np.meshgrid(offs, offs, indexing="ij")
        best = pick_offset(sums, dys, dxs, sums >= 0)
        if best is None:
            return SegmentationRecord.absent(req.frame_index, req.object_id, w_img, h_img)
        score = int(sums.ravel()[best]) / (h * w)
        presence = max(0.0, 1.0 - score / self.tau)
        if presence == 0.0:
            return SegmentationRecord.absent(req.frame_index, req.object_id, w_img, h_img)
        mask = src.mask.translated(int(dys.ravel()[best]), int(dxs.ravel()[best]))
        return SegmentationRecord(req.frame_index, req.object_id, mask, presence, presence)


def concept_descriptor(req: ConceptRequest, frames: FrameStore,
                       bins: int = CONCEPT_BINS) -> np.ndarray:
    """Mean object-region hue/saturation histogram over the request's keyframes."""
    hists = []
    for kf in req.keyframes:
        if kf.mask.is_empty():
            continue
        frame = frames[kf.frame_index]
        _check_dims(kf.mask, frame.shape)
        hists.append(compute_hs_histogram(frame, bins, bins, mask=kf.mask.bits).weights)
    if not hists:
        raise ProtocolViolationError("no keyframe carries a non-empty mask")
    return np.mean(hists, axis=0)


def window_distances(binmap: np.ndarray, descriptor: np.ndarray, wh: int, ww: int,
                     sy: int, sx: int) -> np.ndarray:
    """Bhattacharyya distance of every strided ``wh x ww`` window to ``descriptor``."""
    q = descriptor.ravel()
    support = np.flatnonzero(q > 0)
    lut = np.full(q.size, -1, dtype=np.int32)
    lut[support] = np.arange(support.size, dtype=np.int32)
    counts = kernels.window_support_counts(binmap, lut, support.size, wh, ww, sy, sx)
    p = counts / float(wh * ww)
    bc = np.sqrt(p * q[support]).sum(axis=-1)
    return np.sqrt(np.maximum(0.0, 1.0 - bc))


@dataclass(frozen=True)
class ToyConceptMatcher:
    tau: float = DEFAULT_TAU_CON
    bins: int = CONCEPT_BINS

    def __call__(self, req: ConceptRequest, frames: FrameStore) -> SegmentationRecord:
        if not isinstance(req, ConceptRequest):
            raise ProtocolViolationError(f"concept backend cannot serve {req.op!r} requests")
        cur = frames[req.frame_index]
        h_img, w_img = cur.shape
        anchor = next((k for k in req.keyframes if k.is_anchor), req.keyframes[0])
        _check_dims(anchor.mask, cur.shape)
        box = anchor.mask.bbox()
        if box is None:
            raise ProtocolViolationError("anchor keyframe mask is empty")
        ay, ax, wh, ww = box
        descriptor = concept_descriptor(req, frames, self.bins)
        sy, sx = max(1, wh // 4), max(1, ww // 4)
        # the window grid passes through the anchor's own position
        oy, ox = ay % sy, ax % sx
        binmap = kernels.hs_bin_map(cur.pixels, self.bins, self.bins)[oy:, ox:]
        dist = window_distances(binmap, descriptor, wh, ww, sy, sx)
        ny, nx = dist.shape
        ys, xs = np.meshgrid(oy + np.arange(ny) * sy, ox + np.arange(nx) * sx, indexing="ij")
        best = pick_offset(dist, ys - ay, xs - ax, np.ones_like(dist, dtype=bool))
        if best is None:
            return SegmentationRecord.absent(req.frame_index, req.object_id, w_img, h_img)
        d = float(dist.ravel()[best])
        presence = max(0.0, 1.0 - d / self.tau)
        if presence == 0.0 or not math.isfinite(presence):
            return SegmentationRecord.absent(req.frame_index, req.object_id, w_img, h_img)
        dy = int(ys.ravel()[best]) - ay
        dx = int(xs.ravel()[best]) - ax
        mask = anchor.mask.translated(dy, dx)
        return SegmentationRecord(req.frame_index, req.object_id, mask, presence, presence)
