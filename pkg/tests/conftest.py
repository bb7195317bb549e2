from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def solid_frame(color, width=16, height=12, index=0):
    from secvos.core import ImageFrame

    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:] = color
    return ImageFrame(px, index)


def random_mask(rng, height, width, density=None):
    from secvos.core import BinaryMask

    p = rng.uniform(0.05, 0.95) if density is None else density
    return BinaryMask(rng.random((height, width)) < p)


def blob_mask(rng, height, width):
    """A few random rectangles: realistic boundaries for metric tests."""
    from secvos.core import BinaryMask

    bits = np.zeros((height, width), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        y, x = rng.integers(0, height - 4), rng.integers(0, width - 4)
        h, w = rng.integers(3, height - y + 1), rng.integers(3, width - x + 1)
        bits[y:y + h, x:x + w] = True
    return BinaryMask(bits)
