"""Echo backend: a test double that answers without looking at pixels.

Pixel requests get the newest memory mask back with its presence score;
concept requests get the anchor keyframe mask with presence 1. Run it as a
protocol peer with ``python -m secvos.backends.echo``.
"""

from __future__ import annotations

import sys

from ..core import SegmentationRecord
from .base import ConceptRequest, Request


def echo_segment(req: Request) -> SegmentationRecord:
    if isinstance(req, ConceptRequest):
        anchor = next((k for k in req.keyframes if k.is_anchor), req.keyframes[0])
        mask, presence = anchor.mask, 1.0
    else:
        newest = req.memory[-1]
        mask, presence = newest.mask, newest.presence_score
    if presence == 0.0 or mask.is_empty():
        return SegmentationRecord.absent(req.frame_index, req.object_id, mask.width, mask.height)
    return SegmentationRecord(req.frame_index, req.object_id, mask, presence, presence)


if __name__ == "__main__":
    from .server import main

    sys.exit(main(["--backend", "echo", *sys.argv[1:]]))
