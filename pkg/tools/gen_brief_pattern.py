"""Regenerate src/loopslam/brief_pattern.py.

The 256 BRIEF test pairs are drawn once from a seeded generator and baked
into the repo as a constant table, so descriptors (and therefore
vocabularies and saved maps) are reproducible across runs and platforms.
Offsets are i.i.d. isotropic Gaussian, sigma = 31/5, rounded to the pixel
grid and clamped to the 31x31 patch.

Run from the repo root:  python3 tools/gen_brief_pattern.py
"""

import os

import numpy as np

SEED = 42
SIGMA = 31.0 / 5.0
HALF_PATCH = 15  # offsets live in [-15, 15]


def generate():
    rng = np.random.default_rng(SEED)
    raw = rng.normal(0.0, SIGMA, size=(256, 4))
    return np.clip(np.rint(raw), -HALF_PATCH, HALF_PATCH).astype(np.int8)


def main():
    pat = generate()
    dup = int(np.sum((pat[:, 0] == pat[:, 2]) & (pat[:, 1] == pat[:, 3])))
    out = os.path.join(os.path.dirname(__file__), "..", "src", "loopslam", "brief_pattern.py")
    with open(out, "w") as f:
        f.write('"""BRIEF test-pair table. Generated by tools/gen_brief_pattern.py; do not edit.\n\n')
        f.write("Rows are (x_du, x_dv, y_du, y_dv): bit b is 1 iff the blurred intensity at\n")
        f.write("keypoint + (x_du, x_dv) is strictly less than at keypoint + (y_du, y_dv).\n")
        f.write('Seed %d, sigma 31/5, clamped to the 31x31 patch.\n"""\n\n' % SEED)
        f.write("import numpy as np\n\n")
        f.write("PATTERN = np.array([\n")
        for row in pat:
            f.write("    (%d, %d, %d, %d),\n" % tuple(int(v) for v in row))
        f.write("], dtype=np.int8)\n")
    print("wrote %s (%d degenerate pairs)" % (os.path.normpath(out), dup))


if __name__ == "__main__":
    main()
