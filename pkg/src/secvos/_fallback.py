"""Pure numpy implementations of the hot kernels.

Each function mirrors one in ``_kernels.pyx`` and returns identical integer
results. Hue/saturation bins are computed in exact integer arithmetic, so bin
edges do not depend on floating-point rounding.
"""

from __future__ import annotations

import numpy as np


def hs_bin_map(pixels: np.ndarray, h_bins: int, s_bins: int) -> np.ndarray:
    px = pixels.astype(np.int64)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    d = mx - mn
    # hue as the exact fraction num / (6 d) of a full turn
    num = np.where(mx == r, g - b, np.where(mx == g, b - r + 2 * d, r - g + 4 * d))
    num = np.where(num < 0, num + 6 * d, num)
    den = np.where(d > 0, 6 * d, 1)
    hb = np.where(d > 0, (h_bins * num) // den, 0)
    sb = np.where(mx > 0, (s_bins * d) // np.where(mx > 0, mx, 1), 0)
    hb = np.minimum(hb, h_bins - 1)
    sb = np.minimum(sb, s_bins - 1)
    return (hb * s_bins + sb).astype(np.int32)


def window_support_counts(binmap: np.ndarray, lut: np.ndarray, k: int,
                          wh: int, ww: int, sy: int, sx: int) -> np.ndarray:
    H, W = binmap.shape
    ny = (H - wh) // sy + 1 if H >= wh else 0
    nx = (W - ww) // sx + 1 if W >= ww else 0
    out = np.zeros((ny, nx, k), dtype=np.int64)
    if ny == 0 or nx == 0 or k == 0:
        return out
    slot = lut[binmap]
    ys = np.arange(ny) * sy
    xs = np.arange(nx) * sx
    # summed-area table per support bin, processed in chunks to bound memory
    for k0 in range(0, k, 16):
        k1 = min(k, k0 + 16)
        onehot = (slot[..., None] == np.arange(k0, k1)).astype(np.int64)
        sat = np.zeros((H + 1, W + 1, k1 - k0), dtype=np.int64)
        sat[1:, 1:] = onehot.cumsum(0).cumsum(1)
        y0, x0 = ys[:, None], xs[None, :]
        out[:, :, k0:k1] = (sat[y0 + wh, x0 + ww] - sat[y0, x0 + ww]
                            - sat[y0 + wh, x0] + sat[y0, x0])
    return out


def ssd_scores(frame: np.ndarray, template: np.ndarray, y0: int, x0: int,
               radius: int) -> np.ndarray:
    H, W = frame.shape[:2]
    th, tw = template.shape[:2]
    n = 2 * radius + 1
    out = np.full((n, n), -1, dtype=np.int64)
    f = frame.astype(np.int64)
    t = template.astype(np.int64)
    for iy in range(n):
        y = y0 + iy - radius
        if y < 0 or y + th > H:
            continue
        for ix in range(n):
            x = x0 + ix - radius
            if x < 0 or x + tw > W:
                continue
            diff = f[y:y + th, x:x + tw] - t
            out[iy, ix] = int((diff * diff).sum())
    return out


def dilate_square(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask.copy()
    H, W = mask.shape
    rows = np.zeros_like(mask)
    rx, ry = min(radius, W - 1), min(radius, H - 1)
    for k in range(-rx, rx + 1):
        if k >= 0:
            rows[:, :W - k] |= mask[:, k:]
        else:
            rows[:, -k:] |= mask[:, :W + k]
    out = np.zeros_like(mask)
    for k in range(-ry, ry + 1):
        if k >= 0:
            out[:H - k] |= rows[k:]
        else:
            out[-k:] |= rows[:H + k]
    return out
