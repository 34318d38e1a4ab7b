"""Pure-numpy kernel backend.

Every function here has a compiled twin in loopslam._kernels_c and the two
must agree bit-for-bit: all arithmetic is integer (blur uses exact integral
sums with round-half-up, FAST and BRIEF are comparisons), so there is no
float tolerance to hide behind.
"""

import numpy as np

# Bresenham circle of radius 3, clockwise from 12 o'clock: (du, dv) pairs.
FAST_CIRCLE = np.array(
    [
        (0, -3), (1, -3), (2, -2), (3, -1),
        (3, 0), (3, 1), (2, 2), (1, 3),
        (0, 3), (-1, 3), (-2, 2), (-3, 1),
        (-3, 0), (-3, -1), (-2, -2), (-1, -3),
    ],
    dtype=np.int64,
)

_POPCOUNT8 = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1).astype(np.uint8)


def _segment_lut():
    """LUT over 16-bit masks: does the mask contain >= 9 circularly contiguous set bits."""
    m = np.arange(65536, dtype=np.uint32)
    doubled = (m << 16) | m  # unroll the circle
    run = np.zeros(65536, dtype=np.uint8)
    best = np.zeros(65536, dtype=np.uint8)
    for i in range(32):
        bit = ((doubled >> i) & 1).astype(np.uint8)
        run = (run + 1) * bit
        np.maximum(best, np.minimum(run, 16), out=best)
    return best >= 9


_SEGMENT_OK = _segment_lut()


def box_blur9(img):
    """9x9 box blur with replicate padding and round-half-up division.

    Exact integer arithmetic: out = (window_sum + 40) // 81. The odd window
    size and the half-up rounding make blur commute with intensity
    inversion (255 - x) except at exact ties.
    """
    a = np.pad(img, 4, mode="edge").astype(np.int64)
    ii = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=ii[1:, 1:])
    h, w = img.shape
    s = ii[9 : 9 + h, 9 : 9 + w] - ii[:h, 9 : 9 + w] - ii[9 : 9 + h, :w] + ii[:h, :w]
    return ((s + 40) // 81).astype(np.uint8)


def fast_corners(img, threshold, margin):
    """FAST-9/16 segment test over the image interior.

    Returns an (N, 3) int64 array of (u, v, score) rows in row-major scan
    order. Score is the sum over the 16 circle pixels of how far each one
    clears the threshold, for the passing polarity (bright and dark arcs of
    9 cannot coexist on 16 pixels).
    """
    h, w = img.shape
    if h - 2 * margin <= 0 or w - 2 * margin <= 0:
        return np.zeros((0, 3), dtype=np.int64)
    c = img[margin : h - margin, margin : w - margin].astype(np.int64)
    hi = c + threshold
    lo = c - threshold
    bright_mask = np.zeros(c.shape, dtype=np.uint32)
    dark_mask = np.zeros(c.shape, dtype=np.uint32)
    bright_sum = np.zeros(c.shape, dtype=np.int64)
    dark_sum = np.zeros(c.shape, dtype=np.int64)
    for i, (du, dv) in enumerate(FAST_CIRCLE):
        p = img[margin + dv : h - margin + dv, margin + du : w - margin + du].astype(np.int64)
        b = p > hi
        d = p < lo
        bright_mask |= b.astype(np.uint32) << np.uint32(i)
        dark_mask |= d.astype(np.uint32) << np.uint32(i)
        bright_sum += np.where(b, p - hi, 0)
        dark_sum += np.where(d, lo - p, 0)
    is_bright = _SEGMENT_OK[bright_mask]
    is_dark = _SEGMENT_OK[dark_mask]
    hit = is_bright | is_dark
    vs, us = np.nonzero(hit)
    score = np.where(is_bright[vs, us], bright_sum[vs, us], dark_sum[vs, us])
    return np.column_stack([us + margin, vs + margin, score]).astype(np.int64)


def brief_describe(blurred, us, vs, pattern):
    """256-bit BRIEF over a pre-blurred image.

    us, vs are integer keypoint coordinates; pattern is the (256, 4) int8
    test-pair table. Bits are packed LSB-first: descriptor byte k bit j is
    test 8*k + j. Returns (N, 32) uint8.
    """
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    pat = pattern.astype(np.int64)
    a = blurred[vs[:, None] + pat[:, 1], us[:, None] + pat[:, 0]]
    b = blurred[vs[:, None] + pat[:, 3], us[:, None] + pat[:, 2]]
    bits = (a < b).astype(np.uint8).reshape(-1, 32, 8)
    return np.packbits(bits[:, :, ::-1], axis=2).reshape(-1, 32)


def hamming_cdist(a, b):
    """Pairwise Hamming distances between two (N, 32) / (M, 32) uint8 sets."""
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.int64)
    x = a[:, None, :] ^ b[None, :, :]
    return _POPCOUNT8[x].sum(axis=2, dtype=np.int64)
