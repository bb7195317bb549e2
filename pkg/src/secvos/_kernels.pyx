# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see _fallback.py for the reference numpy versions."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def hs_bin_map(const unsigned char[:, :, ::1] pixels, int h_bins, int s_bins):
    cdef Py_ssize_t H = pixels.shape[0], W = pixels.shape[1], i, j
    cdef long r, g, b, mx, mn, d, num, hb, sb
    out = np.empty((H, W), dtype=np.int32)
    cdef int[:, ::1] o = out
    for i in range(H):
        for j in range(W):
            r = pixels[i, j, 0]
            g = pixels[i, j, 1]
            b = pixels[i, j, 2]
            mx = r if r > g else g
            mx = mx if mx > b else b
            mn = r if r < g else g
            mn = mn if mn < b else b
            d = mx - mn
            if d == 0:
                hb = 0
            else:
                if mx == r:
                    num = g - b
                elif mx == g:
                    num = b - r + 2 * d
                else:
                    num = r - g + 4 * d
                if num < 0:
                    num = num + 6 * d
                hb = (h_bins * num) // (6 * d)
                if hb > h_bins - 1:
                    hb = h_bins - 1
            if mx == 0:
                sb = 0
            else:
                sb = (s_bins * d) // mx
                if sb > s_bins - 1:
                    sb = s_bins - 1
            o[i, j] = <int>(hb * s_bins + sb)
    return out


def window_support_counts(const int[:, ::1] binmap, const int[::1] lut, int k,
                          int wh, int ww, int sy, int sx):
    cdef Py_ssize_t H = binmap.shape[0], W = binmap.shape[1]
    cdef Py_ssize_t ny = (H - wh) // sy + 1 if H >= wh else 0
    cdef Py_ssize_t nx = (W - ww) // sx + 1 if W >= ww else 0
    out = np.zeros((ny, nx, k), dtype=np.int64)
    if ny == 0 or nx == 0 or k == 0:
        return out
    cdef cnp.int64_t[:, :, ::1] o = out
    cdef Py_ssize_t a, c, y, x, y0, x0
    cdef int s
    for a in range(ny):
        y0 = a * sy
        for c in range(nx):
            x0 = c * sx
            for y in range(y0, y0 + wh):
                for x in range(x0, x0 + ww):
                    s = lut[binmap[y, x]]
                    if s >= 0:
                        o[a, c, s] += 1
    return out


def ssd_scores(const unsigned char[:, :, ::1] frame, const unsigned char[:, :, ::1] template,
               int y0, int x0, int radius):
    cdef Py_ssize_t H = frame.shape[0], W = frame.shape[1]
    cdef Py_ssize_t th = template.shape[0], tw = template.shape[1]
    cdef int n = 2 * radius + 1
    out = np.full((n, n), -1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef int iy, ix
    cdef Py_ssize_t y, x, i, j, ch
    cdef cnp.int64_t acc, diff
    for iy in range(n):
        y = y0 + iy - radius
        if y < 0 or y + th > H:
            continue
        for ix in range(n):
            x = x0 + ix - radius
            if x < 0 or x + tw > W:
                continue
            acc = 0
            for i in range(th):
                for j in range(tw):
                    for ch in range(3):
                        diff = <cnp.int64_t>frame[y + i, x + j, ch] - <cnp.int64_t>template[i, j, ch]
                        acc += diff * diff
            o[iy, ix] = acc
    return out


def dilate_square(mask, int radius):
    # separable: a pixel is set when the nearest set pixel along the row (then the
    # column) is within ``radius``; found with one forward and one backward sweep
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t H = m.shape[0], W = m.shape[1], i, j, last
    rows_arr = np.zeros((H, W), dtype=np.uint8)
    out_arr = np.zeros((H, W), dtype=np.uint8)
    last_arr = np.empty(W, dtype=np.intp)
    cdef cnp.uint8_t[:, ::1] rows = rows_arr
    cdef cnp.uint8_t[:, ::1] o = out_arr
    cdef Py_ssize_t[::1] lastcol = last_arr
    if radius < 0:
        radius = 0
    for i in range(H):
        last = -radius - 1
        for j in range(W):
            if m[i, j]:
                last = j
            if j - last <= radius:
                rows[i, j] = 1
        last = W + radius
        for j in range(W - 1, -1, -1):
            if m[i, j]:
                last = j
            if last - j <= radius:
                rows[i, j] = 1
    for j in range(W):
        lastcol[j] = -radius - 1
    for i in range(H):
        for j in range(W):
            if rows[i, j]:
                lastcol[j] = i
            if i - lastcol[j] <= radius:
                o[i, j] = 1
    for j in range(W):
        lastcol[j] = H + radius
    for i in range(H - 1, -1, -1):
        for j in range(W):
            if rows[i, j]:
                lastcol[j] = i
            if lastcol[j] - i <= radius:
                o[i, j] = 1
    return out_arr.view(bool)
