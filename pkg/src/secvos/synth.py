"""Deterministic synthetic videos with planted cuts, teleports and disappearances."""

from __future__ import annotations

import colorsys
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BinaryMask, ImageFrame
from .errors import TrajectoryOutOfBoundsError, ValidationError
from .io import ANNOTATIONS_SUBDIR, FRAMES_SUBDIR, META_FILE, DatasetLayout, compose_labels, write_label_map

RGB = tuple[int, int, int]

# hue bins (of 32) whose centres serve as scene and object colours; pairwise >= 3 bins apart
PALETTE_HUE_BINS = (2, 5, 8, 11, 14, 17, 20, 23, 26, 29)


def hue_color(hue_bin: int, sat: float = 0.8, val: float = 0.85, h_bins: int = 32) -> RGB:
    hue = (hue_bin + 0.5) / h_bins
    r, g, b = colorsys.hsv_to_rgb(hue, sat, val)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


@dataclass(frozen=True)
class ObjectTrack:
    """A rectangle drawn in two halves (top colour, bottom colour) per frame."""

    object_id: int
    height: int
    width: int
    positions: tuple[tuple[int, int] | None, ...]
    colors: tuple[tuple[RGB, RGB], ...]

    def box(self, t: int) -> tuple[int, int, int, int] | None:
        pos = self.positions[t]
        return None if pos is None else (pos[0], pos[1], self.height, self.width)


@dataclass(frozen=True)
class SyntheticSpec:
    name: str
    width: int
    height: int
    n_frames: int
    backgrounds: tuple[RGB, ...]
    cut_indices: tuple[int, ...]
    objects: tuple[ObjectTrack, ...]
    fps: float = 24.0
    noise: int = 0
    seed: int = 0
    info: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0 or self.n_frames <= 0:
            raise ValidationError("resolution and frame count must be positive")
        cuts = self.cut_indices
        if any(not 1 <= c < self.n_frames for c in cuts) or any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValidationError(f"invalid cut indices {cuts}")
        if len(self.backgrounds) != len(cuts) + 1:
            raise ValidationError("need exactly one background per scene")
        if self.noise < 0:
            raise ValidationError("noise amplitude must be >= 0")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids) or any(i <= 0 or i > 255 for i in ids):
            raise ValidationError(f"object ids must be unique and in 1..255: {ids}")
        for o in self.objects:
            if len(o.positions) != self.n_frames or len(o.colors) != self.n_frames:
                raise ValidationError(f"object {o.object_id}: trajectory length != {self.n_frames}")
            for t, pos in enumerate(o.positions):
                if pos is None:
                    continue
                y, x = pos
                if y < 0 or x < 0 or y + o.height > self.height or x + o.width > self.width:
                    raise TrajectoryOutOfBoundsError(
                        f"object {o.object_id} leaves the frame at t={t}: {(y, x, o.height, o.width)}")

    def scene_of(self, t: int) -> int:
        return int(np.searchsorted(self.cut_indices, t, side="right"))


def render_synthetic(spec: SyntheticSpec) -> tuple[list[ImageFrame], dict[int, list[BinaryMask]]]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    frames = []
    gts: dict[int, list[BinaryMask]] = {o.object_id: [] for o in spec.objects}
    for t in range(spec.n_frames):
        img = np.empty((spec.height, spec.width, 3), dtype=np.int16)
        img[:] = spec.backgrounds[spec.scene_of(t)]
        for o in sorted(spec.objects, key=lambda o: o.object_id):
            box = o.box(t)
            bits = np.zeros((spec.height, spec.width), dtype=bool)
            if box is not None:
                y, x, h, w = box
                top, bottom = o.colors[t]
                half = h // 2
                img[y:y + half, x:x + w] = top
                img[y + half:y + h, x:x + w] = bottom
                bits[y:y + h, x:x + w] = True
            gts[o.object_id].append(BinaryMask(bits))
        if spec.noise:
            img += rng.integers(-spec.noise, spec.noise + 1, size=img.shape, dtype=np.int16)
        frames.append(ImageFrame(np.clip(img, 0, 255).astype(np.uint8), t))
    return frames, gts


def generate_synthetic(spec: SyntheticSpec, root: str | os.PathLike) -> DatasetLayout:
    """Write frames (lossless PNG), annotations and metadata under ``root``."""
    from PIL import Image

    frames, gts = render_synthetic(spec)
    layout = DatasetLayout(Path(root))
    fdir = layout.frames_dir(spec.name)
    adir = layout.annotations_dir(spec.name)
    fdir.mkdir(parents=True, exist_ok=True)
    adir.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        Image.fromarray(np.asarray(frame.pixels), "RGB").save(fdir / f"{t:05d}.png", format="PNG")
        labels = compose_labels({oid: seq[t] for oid, seq in gts.items()}, frame.shape)
        write_label_map(adir / f"{t:05d}.png", labels)

    meta_path = layout.root / META_FILE
    meta = {"videos": {}}
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    meta.setdefault("videos", {})[spec.name] = {
        "fps": spec.fps,
        "objects": sorted(gts),
        "planted_cuts": list(spec.cut_indices),
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return layout


# -- trajectory builders ------------------------------------------------------

def bounce_path(rng: np.random.Generator, n: int, start: tuple[int, int], box: tuple[int, int],
                frame: tuple[int, int], max_step: int = 3) -> list[tuple[int, int]]:
    """Constant-velocity motion reflecting off the frame edges, at most ``max_step`` px/frame per axis."""
    (h, w), (H, W) = box, frame
    while True:
        vy, vx = (int(v) for v in rng.integers(-max_step, max_step + 1, size=2))
        if vy or vx:
            break
    y, x = start
    out = []
    for _ in range(n):
        out.append((y, x))
        ny, nx = y + vy, x + vx
        if ny < 0 or ny + h > H:
            vy = -vy
            ny = y + vy
        if nx < 0 or nx + w > W:
            vx = -vx
            nx = x + vx
        y, x = min(max(ny, 0), H - h), min(max(nx, 0), W - w)
    return out


def grid_position(rng: np.random.Generator, box: tuple[int, int], frame: tuple[int, int],
                  avoid: tuple[int, int] | None = None, min_jump: int = 0) -> tuple[int, int]:
    """Random top-left corner on the quarter-box grid the concept matcher scans."""
    (h, w), (H, W) = box, frame
    sy, sx = max(1, h // 4), max(1, w // 4)
    ys = np.arange(0, H - h + 1, sy)
    xs = np.arange(0, W - w + 1, sx)
    for _ in range(1000):
        pos = int(rng.choice(ys)), int(rng.choice(xs))
        if avoid is None or max(abs(pos[0] - avoid[0]), abs(pos[1] - avoid[1])) > min_jump:
            return pos
    raise ValidationError("no grid position satisfies the jump constraint")


def _scene_colors(rng: np.random.Generator, n_scenes: int) -> tuple[RGB, list[RGB]]:
    bins = list(rng.permutation(PALETTE_HUE_BINS))
    obj_bin, rest = bins[0], bins[1:]
    scene_bins = []
    for i in range(n_scenes):
        choices = [b for b in rest if not scene_bins or b != scene_bins[-1]]
        scene_bins.append(choices[int(rng.integers(len(choices)))])
    return hue_color(obj_bin), [hue_color(b) for b in scene_bins]


def planted_video(name: str, cuts: Sequence[int], seed: int, n_frames: int = 120,
                  width: int = 160, height: int = 120, size: int = 16,
                  absent: Sequence[int] = (), noise: int = 0, max_step: int = 3,
                  teleport_jump: int = 16) -> SyntheticSpec:
    """One object moving on a plain background; every cut swaps the background
    and teleports the object to a distant grid-aligned position."""
    rng = np.random.default_rng(seed)
    cuts = tuple(sorted(cuts))
    obj_color, backgrounds = _scene_colors(rng, len(cuts) + 1)
    box, frame = (size, size), (height, width)
    bounds = (0, *cuts, n_frames)
    positions: list[tuple[int, int] | None] = []
    prev = None
    for a, b in zip(bounds, bounds[1:]):
        start = grid_position(rng, box, frame, prev, teleport_jump)
        seg = bounce_path(rng, b - a, start, box, frame, max_step)
        positions.extend(seg)
        prev = seg[-1]
    absent_set = set(absent)
    positions = [None if t in absent_set else p for t, p in enumerate(positions)]
    track = ObjectTrack(1, size, size, tuple(positions), tuple([(obj_color, obj_color)] * n_frames))
    return SyntheticSpec(name, width, height, n_frames, tuple(backgrounds), cuts, (track,),
                         noise=noise, seed=seed)


def acceptance_suite(seed: int = 0, noise: int = 2) -> list[SyntheticSpec]:
    """Ten 120-frame videos with 0-4 planted cuts; three lose their object on frames 70-80."""
    rng = np.random.default_rng(seed)
    cut_counts = (0, 1, 2, 3, 4, 0, 1, 2, 3, 4)
    vanishing = {1, 4, 7}
    specs = []
    for i, k in enumerate(cut_counts):
        while True:
            cuts = sorted(int(c) for c in rng.choice(np.arange(10, 111), size=k, replace=False))
            if all(b - a >= 8 for a, b in zip(cuts, cuts[1:])):
                break
        absent = range(70, 81) if i in vanishing else ()
        specs.append(planted_video(f"synth{i:02d}", cuts, seed * 1000 + i, absent=absent, noise=noise))
    return specs


def toy_tracking_spec(seed: int = 0, noise: int = 2) -> SyntheticSpec:
    """120 frames at 160x120: a square moving <= 3 px/frame, one cut at frame 60
    with a background swap and a teleport."""
    return planted_video("toy_tracking", (60,), seed, noise=noise)


def late_concept_spec() -> SyntheticSpec:
    """Video on which the object's post-cut look is only seen later in the video.

    The object is a 48x48 block, saturated red on top. Its bottom half is a dull
    green except on frames 30-59 and from frame 75 on, where it is a dull blue
    of nearly the same RGB value (same pixel-path score, different hue bin).
    Cuts at 30 and 60 each swap the background and teleport the object.
    """
    rng = np.random.default_rng(7)
    n, size, frame = 90, 48, (120, 160)
    red, green, blue = (220, 40, 40), (120, 136, 120), (120, 120, 136)
    backgrounds = (hue_color(5), hue_color(17), hue_color(26))
    starts = [(12, 12), (60, 96), (36, 48)]
    positions: list[tuple[int, int]] = []
    for start, (a, b) in zip(starts, [(0, 30), (30, 60), (60, n)]):
        positions.extend(bounce_path(rng, b - a, start, (size, size), frame, max_step=2))
    colors = [(red, blue if 30 <= t < 60 or t >= 75 else green) for t in range(n)]
    track = ObjectTrack(1, size, size, tuple(positions), tuple(colors))
    return SyntheticSpec("late_concept", frame[1], frame[0], n, backgrounds, (30, 60), (track,))
