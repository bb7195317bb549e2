"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``secvos._kernels`` is used when it is importable;
otherwise (or when ``SECVOS_PURE_PYTHON=1``) the numpy versions in
``secvos._fallback`` are used. ``IMPLEMENTATION`` names the active one.
Both return bit-identical results for identical inputs.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

if os.environ.get("SECVOS_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _fallback
    IMPLEMENTATION = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        IMPLEMENTATION = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        IMPLEMENTATION = "python"


def implementations() -> dict:
    """All importable implementations, keyed by name (used by tests and benchmarks)."""
    impls = {"python": _fallback}
    try:
        from . import _kernels
        impls["cython"] = _kernels
    except ImportError:
        pass
    return impls


def hs_bin_map(pixels: np.ndarray, h_bins: int, s_bins: int, impl=None) -> np.ndarray:
    """Flat hue/saturation bin index (``h * s_bins + s``) for every pixel."""
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    return (impl or _impl).hs_bin_map(px, int(h_bins), int(s_bins))


def window_support_counts(binmap: np.ndarray, lut: np.ndarray, k: int, wh: int, ww: int,
                          sy: int, sx: int, impl=None) -> np.ndarray:
    """Per-window pixel counts for ``k`` selected bins.

    ``lut`` maps a flat bin index to a slot in ``[0, k)`` or -1 to ignore it.
    Windows of size ``wh x ww`` start at multiples of ``(sy, sx)`` and lie fully
    inside the map. Returns an int64 array of shape ``(ny, nx, k)``.
    """
    bm = np.ascontiguousarray(binmap, dtype=np.int32)
    lt = np.ascontiguousarray(lut, dtype=np.int32)
    return (impl or _impl).window_support_counts(bm, lt, int(k), int(wh), int(ww), int(sy), int(sx))


def ssd_scores(frame: np.ndarray, template: np.ndarray, y0: int, x0: int, radius: int,
               impl=None) -> np.ndarray:
    """Summed squared RGB difference of ``template`` placed at every offset.

    Entry ``[dy + radius, dx + radius]`` scores the template with its top-left
    corner at ``(y0 + dy, x0 + dx)``; placements not fully inside the frame are -1.
    """
    f = np.ascontiguousarray(frame, dtype=np.uint8)
    t = np.ascontiguousarray(template, dtype=np.uint8)
    return (impl or _impl).ssd_scores(f, t, int(y0), int(x0), int(radius))


def dilate_square(mask: np.ndarray, radius: int, impl=None) -> np.ndarray:
    """Binary dilation by a ``(2r+1) x (2r+1)`` square (Chebyshev ball)."""
    m = np.ascontiguousarray(mask, dtype=bool)
    # the numpy version (a few whole-array shifted ORs) outruns the compiled
    # per-pixel loop, so it is the default even when the extension is built
    return (impl or _fallback).dilate_square(m, int(radius))
