"""Compiled and numpy kernels agree exactly with each other and with loop oracles."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from secvos import kernels
from tests.oracles import reference as ref

IMPLS = kernels.implementations()
impl_names = pytest.mark.parametrize("name", sorted(IMPLS))


def test_active_implementation_is_known():
    assert kernels.IMPLEMENTATION in IMPLS


def test_compiled_core_is_built():
    # the editable install builds the extension; the fallback exists for environments without a compiler
    assert "cython" in IMPLS


@impl_names
def test_hs_bin_map_matches_exact_rationals(name, rng):
    px = rng.integers(0, 256, size=(48, 48, 3), dtype=np.uint8)
    # greys, pure hues and the sector seams
    px[0, :8] = [[0, 0, 0], [255, 255, 255], [128, 128, 128], [255, 0, 0],
                 [0, 255, 0], [0, 0, 255], [255, 0, 255], [255, 255, 0]]
    got = kernels.hs_bin_map(px, 32, 32, impl=IMPLS[name])
    for y in range(px.shape[0]):
        for x in range(px.shape[1]):
            hb, sb = ref.hs_bins_exact(*(int(v) for v in px[y, x]))
            assert got[y, x] == hb * 32 + sb, (y, x, px[y, x])


@impl_names
def test_hs_bin_map_exact_on_red_sector_plane(name):
    # every (g, b) with r = 255: all red-sector hue fractions, including exact bin edges
    g, b = np.meshgrid(np.arange(256), np.arange(256), indexing="ij")
    px = np.stack([np.full_like(g, 255), g, b], axis=-1).astype(np.uint8)
    got = kernels.hs_bin_map(px, 32, 32, impl=IMPLS[name])
    want = np.array([[ref.hs_bins_exact(255, int(gg), int(bb)) for bb in range(256)]
                     for gg in range(256)])
    assert np.array_equal(got, want[..., 0] * 32 + want[..., 1])


@settings(max_examples=50)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3))),
       st.integers(1, 40), st.integers(1, 40))
def test_hs_bin_map_parity(px, hb, sb):
    outs = [kernels.hs_bin_map(px, hb, sb, impl=m) for m in IMPLS.values()]
    for o in outs[1:]:
        assert np.array_equal(outs[0], o)
    assert outs[0].min() >= 0 and outs[0].max() < hb * sb


def _support_counts_oracle(binmap, lut, k, wh, ww, sy, sx):
    H, W = binmap.shape
    ny, nx = (H - wh) // sy + 1, (W - ww) // sx + 1
    out = np.zeros((ny, nx, k), dtype=np.int64)
    for i in range(ny):
        for j in range(nx):
            for v in binmap[i * sy:i * sy + wh, j * sx:j * sx + ww].ravel():
                if lut[v] >= 0:
                    out[i, j, lut[v]] += 1
    return out


@impl_names
def test_window_support_counts_oracle(name, rng):
    for _ in range(5):
        H, W = rng.integers(8, 30, size=2)
        nbins = int(rng.integers(2, 50))
        binmap = rng.integers(0, nbins, size=(H, W)).astype(np.int32)
        support = rng.choice(nbins, size=int(rng.integers(1, nbins + 1)), replace=False)
        lut = np.full(nbins, -1, np.int32)
        lut[support] = np.arange(support.size)
        wh, ww = int(rng.integers(1, H + 1)), int(rng.integers(1, W + 1))
        sy, sx = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        got = kernels.window_support_counts(binmap, lut, support.size, wh, ww, sy, sx, impl=IMPLS[name])
        assert np.array_equal(got, _support_counts_oracle(binmap, lut, support.size, wh, ww, sy, sx))


def _ssd_oracle(frame, tpl, y0, x0, r):
    H, W = frame.shape[:2]
    h, w = tpl.shape[:2]
    out = np.full((2 * r + 1, 2 * r + 1), -1, dtype=np.int64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            y, x = y0 + dy, x0 + dx
            if 0 <= y and 0 <= x and y + h <= H and x + w <= W:
                d = frame[y:y + h, x:x + w].astype(np.int64) - tpl
                out[dy + r, dx + r] = int((d * d).sum())
    return out


@impl_names
def test_ssd_scores_oracle(name, rng):
    for _ in range(5):
        frame = rng.integers(0, 256, size=(24, 30, 3), dtype=np.uint8)
        h, w = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        y0, x0 = int(rng.integers(0, 24 - h + 1)), int(rng.integers(0, 30 - w + 1))
        tpl = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        r = int(rng.integers(0, 8))
        got = kernels.ssd_scores(frame, tpl, y0, x0, r, impl=IMPLS[name])
        assert np.array_equal(got, _ssd_oracle(frame, tpl.astype(np.int64), y0, x0, r))


def _dilate_oracle(mask, r):
    H, W = mask.shape
    out = np.zeros_like(mask)
    for y, x in zip(*np.nonzero(mask)):
        out[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1] = True
    return out


@impl_names
@settings(max_examples=40)
@given(arrays(np.bool_, st.tuples(st.integers(1, 20), st.integers(1, 20))), st.integers(0, 6))
def test_dilate_square_oracle(name, mask, r):
    got = kernels.dilate_square(mask, r, impl=IMPLS[name])
    assert got.dtype == bool
    assert np.array_equal(got, _dilate_oracle(mask, r))
