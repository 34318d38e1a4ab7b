"""Minimal image front end: binary PGM IO, FAST-9/16 corners, 256-bit BRIEF.

Raw images are consumed here and discarded by the rest of the pipeline;
keyframes carry only keypoints and descriptors. All heavy loops live in
loopslam.kernels (compiled when available, numpy otherwise).
"""

import math

import numpy as np

from . import kernels
from .brief_pattern import PATTERN

# Keypoints keep this distance from every image edge so the 31x31 BRIEF
# patch plus the 9x9 blur support never leave the image.
BORDER_MARGIN = 20

MIN_DETECT_SIZE = 64


class PgmError(ValueError):
    """Base class for PGM read failures."""


class PgmHeaderError(PgmError):
    """Header is not parseable (bad magic, non-numeric fields, extra comments)."""


class PgmFormatError(PgmError):
    """Recognizable PNM file but not binary 8-bit P5 (e.g. ASCII P2)."""


class PgmMaxvalError(PgmError):
    """Maxval other than 255."""


class PgmTruncatedError(PgmError):
    """Payload shorter than width * height."""


class GrayImage:
    """Row-major 8-bit grayscale image."""

    __slots__ = ("data",)

    def __init__(self, data):
        a = np.ascontiguousarray(data)
        if a.dtype != np.uint8 or a.ndim != 2:
            raise ValueError("GrayImage wants a 2-D uint8 array")
        self.data = a

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @classmethod
    def from_bytes(cls, width, height, buf):
        buf = np.frombuffer(buf, dtype=np.uint8)
        if buf.size != width * height:
            raise ValueError("buffer length %d != %d x %d" % (buf.size, width, height))
        return cls(buf.reshape(height, width).copy())

    def inverted(self):
        return GrayImage(255 - self.data)


class Keypoint:
    """FAST corner: integer pixel position plus score."""

    __slots__ = ("u", "v", "score")

    def __init__(self, u, v, score):
        self.u = int(u)
        self.v = int(v)
        self.score = int(score)

    def __iter__(self):
        return iter((self.u, self.v, self.score))

    def __repr__(self):
        return "Keypoint(u=%d, v=%d, score=%d)" % (self.u, self.v, self.score)


def load_pgm(path):
    """Read a binary PGM (P5, maxval 255) file pixel-exactly.

    One comment line after the magic is tolerated; anything else
    non-standard raises a PgmError subclass that names the problem.
    """
    with open(path, "rb") as f:
        buf = f.read()

    pos = 0

    def skip_ws(p):
        while p < len(buf) and buf[p : p + 1].isspace():
            p += 1
        return p

    def token(p):
        p = skip_ws(p)
        start = p
        while p < len(buf) and not buf[p : p + 1].isspace():
            p += 1
        if p == start:
            raise PgmHeaderError("%s: unexpected end of header" % path)
        return buf[start:p], p

    magic, pos = token(pos)
    if magic in (b"P1", b"P2", b"P3", b"P4", b"P6"):
        raise PgmFormatError("%s: %s not supported, need binary P5" % (path, magic.decode()))
    if magic != b"P5":
        raise PgmHeaderError("%s: bad magic %r" % (path, magic))

    pos = skip_ws(pos)
    if pos < len(buf) and buf[pos : pos + 1] == b"#":
        nl = buf.find(b"\n", pos)
        if nl < 0:
            raise PgmHeaderError("%s: unterminated comment" % path)
        pos = nl + 1

    fields = []
    for _ in range(3):
        t, pos = token(pos)
        if not t.isdigit():
            raise PgmHeaderError("%s: non-numeric header field %r" % (path, t))
        fields.append(int(t))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmHeaderError("%s: bad dimensions %dx%d" % (path, width, height))
    if maxval != 255:
        raise PgmMaxvalError("%s: maxval %d unsupported, need 255" % (path, maxval))

    pos += 1  # exactly one whitespace byte separates header from payload
    payload = buf[pos : pos + width * height]
    if len(payload) < width * height:
        raise PgmTruncatedError(
            "%s: payload %d bytes, need %d" % (path, len(payload), width * height)
        )
    return GrayImage.from_bytes(width, height, payload)


def save_pgm(img, path):
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
        f.write(img.data.tobytes())


def detect_fast(img, threshold=20, target=500):
    """FAST-9/16 corners with grid-bucketed non-maximum suppression.

    The image is split into an 8x8 grid; each cell keeps at most
    ceil(target/64) corners by score, then the survivors are cut to
    `target` overall. Ties break toward smaller (v, u) so output order is
    deterministic. Returns Keypoints sorted by descending score.
    """
    if img.width < MIN_DETECT_SIZE or img.height < MIN_DETECT_SIZE:
        raise ValueError(
            "image %dx%d too small for detection (need >= %d)"
            % (img.width, img.height, MIN_DETECT_SIZE)
        )
    if target < 1:
        raise ValueError("target must be >= 1")
    raw = kernels.fast_corners(img.data, int(threshold), BORDER_MARGIN)
    if raw.shape[0] == 0:
        return []
    us, vs, scores = raw[:, 0], raw[:, 1], raw[:, 2]
    cell = (vs * 8 // img.height) * 8 + (us * 8 // img.width)
    cap = math.ceil(target / 64)
    # visit in (-score, v, u) order; accepting under per-cell caps then
    # cutting at `target` equals bucketing first and truncating after
    order = np.lexsort((us, vs, -scores))
    keep = []
    counts = np.zeros(64, dtype=np.int64)
    for idx in order:
        c = cell[idx]
        if counts[c] < cap:
            counts[c] += 1
            keep.append(idx)
            if len(keep) == target:
                break
    return [Keypoint(us[i], vs[i], scores[i]) for i in keep]


def compute_brief(img, kps):
    """256-bit BRIEF descriptors, one 32-byte row per keypoint.

    The image is smoothed with the exact 9x9 integer box blur first; the
    frozen test-pair table comes from loopslam.brief_pattern. Bit b of the
    descriptor is 1 iff blurred(p + x_b) < blurred(p + y_b), packed
    LSB-first.
    """
    us = np.array([k.u for k in kps], dtype=np.int64)
    vs = np.array([k.v for k in kps], dtype=np.int64)
    if us.size:
        bad = (
            (us < BORDER_MARGIN)
            | (us >= img.width - BORDER_MARGIN)
            | (vs < BORDER_MARGIN)
            | (vs >= img.height - BORDER_MARGIN)
        )
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise ValueError(
                "keypoint (%d, %d) violates the %d px border margin" % (us[k], vs[k], BORDER_MARGIN)
            )
    blurred = kernels.box_blur9(img.data)
    return kernels.brief_describe(blurred, us, vs, PATTERN)


def hamming(a, b):
    """Hamming distance between two 32-byte descriptors."""
    a = np.asarray(a, dtype=np.uint8).reshape(1, 32)
    b = np.asarray(b, dtype=np.uint8).reshape(1, 32)
    return int(kernels.hamming_cdist(a, b)[0, 0])
