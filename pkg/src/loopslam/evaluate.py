"""Trajectory evaluation: TUM-format trajectory IO and absolute trajectory
error after closed-form rigid (rotation + translation, no scale) alignment.
"""

import numpy as np

from loopslam.geom import Pose, UnitQuaternion


class AteReport:
    __slots__ = ("rmse", "mean", "median", "max", "aligned", "count")

    def __init__(self, rmse, mean, median, max_, aligned, count):
        self.rmse = float(rmse)
        self.mean = float(mean)
        self.median = float(median)
        self.max = float(max_)
        self.aligned = bool(aligned)
        self.count = int(count)

    def as_dict(self):
        return {
            "ate_rmse": self.rmse,
            "ate_mean": self.mean,
            "ate_median": self.median,
            "ate_max": self.max,
            "ate_aligned": int(self.aligned),
            "ate_count": self.count,
        }

    def __repr__(self):
        return "AteReport(rmse=%.6g, mean=%.6g, median=%.6g, max=%.6g, n=%d)" % (
            self.rmse,
            self.mean,
            self.median,
            self.max,
            self.count,
        )


def write_tum(path, times, poses):
    """One line per pose: 'timestamp tx ty tz qx qy qz qw', 9 significant digits."""
    with open(path, "w") as f:
        for t, pose in zip(times, poses):
            q = pose.q
            f.write(
                "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n"
                % (t, pose.p[0], pose.p[1], pose.p[2], q.x, q.y, q.z, q.w)
            )


def read_tum(path):
    """Returns (times (N,), positions (N, 3), quaternions (N, 4) wxyz)."""
    times = []
    pos = []
    quat = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError("%s:%d: expected 8 fields, got %d" % (path, lineno, len(parts)))
            vals = [float(x) for x in parts]
            times.append(vals[0])
            pos.append(vals[1:4])
            quat.append([vals[7], vals[4], vals[5], vals[6]])
    return np.array(times), np.array(pos).reshape(-1, 3), np.array(quat).reshape(-1, 4)


def read_tum_poses(path):
    """Like read_tum but wraps rows into Pose objects."""
    times, pos, quat = read_tum(path)
    poses = [Pose(pos[k], UnitQuaternion.from_array(quat[k])) for k in range(len(times))]
    return times, poses


def associate(times_a, times_b, max_dt=0.01):
    """Greedy unique nearest-timestamp pairing within max_dt.

    Candidate pairs are sorted by |dt| and taken while both sides are
    unused, so each frame matches at most once.
    """
    times_a = np.asarray(times_a, dtype=np.float64)
    times_b = np.asarray(times_b, dtype=np.float64)
    cands = []
    for i, t in enumerate(times_a):
        if len(times_b) == 0:
            break
        j = int(np.argmin(np.abs(times_b - t)))
        dt = abs(times_b[j] - t)
        if dt <= max_dt:
            cands.append((dt, i, j))
    cands.sort(key=lambda c: (c[0], c[1]))
    used_a = set()
    used_b = set()
    pairs = []
    for _, i, j in cands:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    pairs.sort()
    return pairs


def rigid_align(P, Q):
    """R, t minimizing sum ||R p + t - q||^2 (orthogonal Procrustes, no scale)."""
    pm = P.mean(axis=0)
    qm = Q.mean(axis=0)
    H = (P - pm).T @ (Q - qm)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d if d != 0 else 1.0]) @ U.T
    t = qm - R @ pm
    return R, t


def ate(estimated, ground_truth, max_dt=0.01, align=True):
    """ATE over nearest-timestamp-matched frames.

    `estimated` and `ground_truth` are (times, positions (N, 3)) tuples.
    """
    et, ep = estimated
    gt, gp = ground_truth
    ep = np.asarray(ep, dtype=np.float64).reshape(-1, 3)
    gp = np.asarray(gp, dtype=np.float64).reshape(-1, 3)
    pairs = associate(et, gt, max_dt)
    if len(pairs) < 2:
        raise ValueError("no timestamp overlap between trajectories")
    ei = np.array([i for i, _ in pairs])
    gi = np.array([j for _, j in pairs])
    P = ep[ei]
    Q = gp[gi]
    if align:
        R, t = rigid_align(P, Q)
        P = P @ R.T + t
    err = np.linalg.norm(P - Q, axis=1)
    return AteReport(
        np.sqrt(np.mean(err**2)),
        np.mean(err),
        np.median(err),
        np.max(err),
        align,
        len(pairs),
    )
