"""Image front-end tests.

Oracles here are deliberately naive re-implementations (per-pixel loops,
shifted-window sums) that share nothing with the kernel code paths except
the frozen BRIEF pattern table, which is an input, not an algorithm.
"""

import math

import numpy as np
import pytest

from loopslam.brief_pattern import PATTERN
from loopslam.imgproc import (
    BORDER_MARGIN,
    GrayImage,
    Keypoint,
    PgmFormatError,
    PgmHeaderError,
    PgmMaxvalError,
    PgmTruncatedError,
    compute_brief,
    detect_fast,
    hamming,
    load_pgm,
    save_pgm,
)

CIRCLE = [
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
]


def oracle_segment_test(data, u, v, t):
    """Plain-loop FAST-9/16 check for one pixel."""
    c = int(data[v, u])
    flags = []
    for du, dv in CIRCLE:
        p = int(data[v + dv, u + du])
        flags.append(1 if p > c + t else (-1 if p < c - t else 0))
    for want in (1, -1):
        run = 0
        for f in flags + flags:
            run = run + 1 if f == want else 0
            if run >= 9:
                return True
    return False


def oracle_blur(data):
    """9x9 replicate-padded box blur by summing 81 shifted views."""
    pad = np.pad(data, 4, mode="edge").astype(np.int64)
    h, w = data.shape
    s = np.zeros((h, w), dtype=np.int64)
    for dy in range(9):
        for dx in range(9):
            s += pad[dy : dy + h, dx : dx + w]
    return ((s + 40) // 81).astype(np.uint8)


def oracle_brief_bit(blurred, kp, b):
    xd, yd = PATTERN[b, :2], PATTERN[b, 2:]
    a = int(blurred[kp.v + int(xd[1]), kp.u + int(xd[0])])
    c = int(blurred[kp.v + int(yd[1]), kp.u + int(yd[0])])
    return 1 if a < c else 0, a == c


def sprite_frame(seed, n_sprites=90, w=640, h=480):
    """Test-local deterministic texture: bright 5x5 squares on black."""
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w), dtype=np.uint8)
    for _ in range(n_sprites):
        u = int(rng.integers(6, w - 6))
        v = int(rng.integers(6, h - 6))
        val = int(rng.integers(90, 256))
        patch = img[v - 2 : v + 3, u - 2 : u + 3]
        np.maximum(patch, val, out=patch)
    return GrayImage(img)


# -- PGM ---------------------------------------------------------------------


def test_load_pgm_direct_decode(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 127, 200, 255]))
    img = load_pgm(str(p))
    assert img.width == 2 and img.height == 2
    assert np.array_equal(img.data, [[0, 127], [200, 255]])


def test_load_pgm_comment_tolerated(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n# made by a camera\n2 1 255\n" + bytes([7, 9]))
    assert np.array_equal(load_pgm(str(p)).data, [[7, 9]])


def test_load_pgm_distinct_errors(tmp_path):
    cases = [
        (b"P2\n2 2\n255\n0 1 2 3\n", PgmFormatError),
        (b"P6\n2 2\n255\n" + bytes(12), PgmFormatError),
        (b"Px\n2 2\n255\n" + bytes(4), PgmHeaderError),
        (b"P5\n2 two\n255\n" + bytes(4), PgmHeaderError),
        (b"P5\n0 2\n255\n", PgmHeaderError),
        (b"P5\n2 2\n65535\n" + bytes(8), PgmMaxvalError),
        (b"P5\n2 2\n255\n" + bytes(3), PgmTruncatedError),
        (b"P5\n2 2", PgmHeaderError),
    ]
    for i, (payload, err) in enumerate(cases):
        p = tmp_path / ("bad%d.pgm" % i)
        p.write_bytes(payload)
        with pytest.raises(err):
            load_pgm(str(p))


def test_pgm_round_trip_byte_identical(tmp_path):
    img = sprite_frame(3)
    p1, p2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
    save_pgm(img, str(p1))
    back = load_pgm(str(p1))
    assert np.array_equal(back.data, img.data)
    save_pgm(back, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


# -- FAST --------------------------------------------------------------------


def test_detect_fast_uniform_empty():
    img = GrayImage(np.full((100, 100), 55, dtype=np.uint8))
    assert detect_fast(img, threshold=20, target=500) == []


def test_detect_fast_single_dot():
    data = np.zeros((100, 100), dtype=np.uint8)
    data[47, 52] = 255
    img = GrayImage(data)
    kps = detect_fast(img, threshold=20, target=10)
    assert len(kps) >= 1
    assert any(abs(k.u - 52) <= 1 and abs(k.v - 47) <= 1 for k in kps)
    # exhaustive oracle over the interior agrees with the raw detector
    hits = {
        (u, v)
        for v in range(BORDER_MARGIN, 100 - BORDER_MARGIN)
        for u in range(BORDER_MARGIN, 100 - BORDER_MARGIN)
        if oracle_segment_test(data, u, v, 20)
    }
    assert {(k.u, k.v) for k in kps} <= hits
    assert (52, 47) in hits


def test_detect_fast_too_small_and_bad_target():
    img = GrayImage(np.zeros((63, 100), dtype=np.uint8))
    with pytest.raises(ValueError):
        detect_fast(img)
    with pytest.raises(ValueError):
        detect_fast(sprite_frame(1), target=0)


def test_detect_fast_sprite_frame_contract():
    img = sprite_frame(7)
    target = 500
    kps = detect_fast(img, threshold=20, target=target)
    assert 0 < len(kps) <= target
    scores = [k.score for k in kps]
    assert scores == sorted(scores, reverse=True)
    cap = math.ceil(target / 64)
    cells = {}
    for k in kps:
        assert BORDER_MARGIN <= k.u < img.width - BORDER_MARGIN
        assert BORDER_MARGIN <= k.v < img.height - BORDER_MARGIN
        c = (k.v * 8 // img.height, k.u * 8 // img.width)
        cells[c] = cells.get(c, 0) + 1
    assert max(cells.values()) <= cap
    # every returned corner independently re-passes the segment test
    for k in kps:
        assert oracle_segment_test(img.data, k.u, k.v, 20)


def test_detect_fast_returns_fewer_when_scene_sparse():
    img = sprite_frame(11, n_sprites=3)
    kps = detect_fast(img, threshold=20, target=500)
    assert 0 < len(kps) < 500


# -- BRIEF -------------------------------------------------------------------


def test_compute_brief_deterministic():
    img = sprite_frame(13)
    kps = detect_fast(img, threshold=20, target=50)
    d1 = compute_brief(img, kps)
    d2 = compute_brief(GrayImage(img.data.copy()), list(kps))
    assert d1.shape == (len(kps), 32) and d1.dtype == np.uint8
    assert np.array_equal(d1, d2)


def test_compute_brief_border_error():
    img = sprite_frame(17)
    with pytest.raises(ValueError):
        compute_brief(img, [Keypoint(5, 50, 1)])
    with pytest.raises(ValueError):
        compute_brief(img, [Keypoint(img.width - BORDER_MARGIN, 50, 1)])


def test_compute_brief_matches_per_bit_oracle():
    img = sprite_frame(19)
    kps = detect_fast(img, threshold=20, target=10)
    assert len(kps) == 10
    desc = compute_brief(img, kps)
    blurred = oracle_blur(img.data)
    for i, kp in enumerate(kps):
        for b in range(256):
            want, _ = oracle_brief_bit(blurred, kp, b)
            got = (desc[i, b >> 3] >> (b & 7)) & 1
            assert got == want


def test_compute_brief_inversion_complement():
    # blur commutes exactly with inversion (window 81 is odd, rounding is
    # half-up), so bits flip wherever the two blurred samples differ; exact
    # ties compare false on both sides.
    img = sprite_frame(23)
    kps = detect_fast(img, threshold=20, target=40)
    d = compute_brief(img, kps)
    d_inv = compute_brief(img.inverted(), kps)
    blurred = oracle_blur(img.data)
    assert np.array_equal(oracle_blur(img.inverted().data), 255 - blurred)
    for i, kp in enumerate(kps):
        for b in range(256):
            bit = (d[i, b >> 3] >> (b & 7)) & 1
            bit_inv = (d_inv[i, b >> 3] >> (b & 7)) & 1
            _, tied = oracle_brief_bit(blurred, kp, b)
            if tied:
                assert bit == 0 and bit_inv == 0
            else:
                assert bit_inv == 1 - bit


def test_compute_brief_inversion_full_complement_when_tie_free():
    # linear ramp 2u + 3v: the box blur reproduces it exactly away from the
    # padding, and no frozen test pair satisfies 2*du + 3*dv == 0, so every
    # bit has strictly different samples and the complement is exact.
    u, v = np.meshgrid(np.arange(41), np.arange(41))
    img = GrayImage((2 * u + 3 * v).astype(np.uint8))
    kp = [Keypoint(20, 20, 1)]
    d = compute_brief(img, kp)
    d_inv = compute_brief(img.inverted(), kp)
    assert np.array_equal(np.bitwise_xor(d[0], d_inv[0]), np.full(32, 255, np.uint8))


# -- Hamming -----------------------------------------------------------------


def test_hamming_trivial():
    rng = np.random.default_rng(29)
    a = rng.integers(0, 256, 32, dtype=np.uint8)
    assert hamming(a, a) == 0
    assert hamming(np.zeros(32, np.uint8), np.full(32, 255, np.uint8)) == 256


def test_hamming_bit_loop_oracle():
    rng = np.random.default_rng(31)
    for _ in range(200):
        a = rng.integers(0, 256, 32, dtype=np.uint8)
        b = rng.integers(0, 256, 32, dtype=np.uint8)
        want = sum(bin(int(x) ^ int(y)).count("1") for x, y in zip(a, b))
        assert hamming(a, b) == want


def test_hamming_metric_properties():
    rng = np.random.default_rng(37)
    trips = rng.integers(0, 256, size=(10000, 3, 32), dtype=np.uint8)
    for a, b, c in trips:
        ab, ba = hamming(a, b), hamming(b, a)
        assert ab == ba
        assert (ab == 0) == bool(np.array_equal(a, b))
        assert ab <= hamming(a, c) + hamming(c, b)
