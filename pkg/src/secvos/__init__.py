"""Scene-adaptive video object segmentation: tracker orchestration and J&F evaluation."""

from .core import (
    BinaryMask,
    ImageFrame,
    RleMask,
    SegmentationRecord,
    boundary_map,
    mask_iou,
    rle_decode,
    rle_encode,
)
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .pipeline import RunStats, TrackerConfig, TrackResult, track, track_offline, track_video
from .scenedetect import (
    HsHistogram,
    SceneChangeDetector,
    SceneList,
    bhattacharyya_distance,
    compute_hs_histogram,
    segment_scenes,
)

__version__ = "0.1.0"
