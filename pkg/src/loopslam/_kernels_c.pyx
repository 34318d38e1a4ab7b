# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: bit-identical twins of loopslam.kernels._numpy.

All arithmetic is integer, so "identical" means identical, not close.
Keep any change here in lockstep with the numpy backend; the test suite
diffs the two on random inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef int[16] CIRCLE_DU
cdef int[16] CIRCLE_DV
CIRCLE_DU[:] = [0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1]
CIRCLE_DV[:] = [-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3]

cdef unsigned char[256] POP8
cdef int _i
for _i in range(256):
    POP8[_i] = <unsigned char>(bin(_i).count("1"))


cdef inline bint _has_arc9(unsigned int mask) noexcept nogil:
    cdef unsigned int dbl = (mask << 16) | mask
    cdef int run = 0
    cdef int i
    for i in range(32):
        if (dbl >> i) & 1u:
            run += 1
            if run >= 9:
                return True
        else:
            run = 0
    return False


def box_blur9(img):
    """See loopslam.kernels._numpy.box_blur9."""
    cdef const unsigned char[:, ::1] pad = np.pad(img, 4, mode="edge")
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    ii_arr = np.zeros((h + 9, w + 9), dtype=np.int64)
    cdef long long[:, ::1] ii = ii_arr
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef long long rowsum, s
    with nogil:
        for y in range(h + 8):
            rowsum = 0
            for x in range(w + 8):
                rowsum += pad[y, x]
                ii[y + 1, x + 1] = ii[y, x + 1] + rowsum
        for y in range(h):
            for x in range(w):
                s = ii[y + 9, x + 9] - ii[y, x + 9] - ii[y + 9, x] + ii[y, x]
                out[y, x] = <unsigned char>((s + 40) / 81)
    return out_arr


def fast_corners(img, threshold, margin):
    """See loopslam.kernels._numpy.fast_corners."""
    cdef const unsigned char[:, ::1] im = np.ascontiguousarray(img, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0]
    cdef Py_ssize_t w = im.shape[1]
    cdef int t = threshold
    cdef Py_ssize_t m = margin
    if h - 2 * m <= 0 or w - 2 * m <= 0:
        return np.zeros((0, 3), dtype=np.int64)
    hits = []
    cdef Py_ssize_t y, x
    cdef int i, c, hi, lo, p, nb, nd
    cdef unsigned int bmask, dmask
    cdef long long bsum, dsum
    cdef int[16] ring
    for y in range(m, h - m):
        for x in range(m, w - m):
            c = im[y, x]
            hi = c + t
            lo = c - t
            # compass pre-test: an arc of 9 always covers >= 2 of the 4
            nb = 0
            nd = 0
            for i in range(0, 16, 4):
                p = im[y + CIRCLE_DV[i], x + CIRCLE_DU[i]]
                if p > hi:
                    nb += 1
                elif p < lo:
                    nd += 1
            if nb < 2 and nd < 2:
                continue
            bmask = 0
            dmask = 0
            bsum = 0
            dsum = 0
            for i in range(16):
                p = im[y + CIRCLE_DV[i], x + CIRCLE_DU[i]]
                ring[i] = p
                if p > hi:
                    bmask |= 1u << i
                    bsum += p - hi
                elif p < lo:
                    dmask |= 1u << i
                    dsum += lo - p
            if _has_arc9(bmask):
                hits.append((x, y, bsum))
            elif _has_arc9(dmask):
                hits.append((x, y, dsum))
    if not hits:
        return np.zeros((0, 3), dtype=np.int64)
    return np.array(hits, dtype=np.int64)


def brief_describe(blurred, us, vs, pattern):
    """See loopslam.kernels._numpy.brief_describe."""
    cdef const unsigned char[:, ::1] im = np.ascontiguousarray(blurred, dtype=np.uint8)
    cdef long long[::1] uu = np.ascontiguousarray(us, dtype=np.int64)
    cdef long long[::1] vv = np.ascontiguousarray(vs, dtype=np.int64)
    cdef const signed char[:, ::1] pat = np.ascontiguousarray(pattern, dtype=np.int8)
    cdef Py_ssize_t n = uu.shape[0]
    out_arr = np.zeros((n, 32), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t k, b
    cdef Py_ssize_t u, v
    cdef int a_val, b_val
    with nogil:
        for k in range(n):
            u = uu[k]
            v = vv[k]
            for b in range(256):
                a_val = im[v + pat[b, 1], u + pat[b, 0]]
                b_val = im[v + pat[b, 3], u + pat[b, 2]]
                if a_val < b_val:
                    out[k, b >> 3] |= <unsigned char>(1 << (b & 7))
    return out_arr


def hamming_cdist(a, b):
    """See loopslam.kernels._numpy.hamming_cdist."""
    cdef const unsigned char[:, ::1] aa = np.ascontiguousarray(a, dtype=np.uint8)
    cdef const unsigned char[:, ::1] bb = np.ascontiguousarray(b, dtype=np.uint8)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    out_arr = np.zeros((n, m), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef int d
    if n == 0 or m == 0:
        return out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                d = 0
                for k in range(32):
                    d += POP8[aa[i, k] ^ bb[j, k]]
                out[i, j] = d
    return out_arr
