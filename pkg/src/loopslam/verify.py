"""Descriptor matching and two-step geometric loop verification:
2D-2D fundamental-matrix RANSAC followed by 3D-2D PnP RANSAC.

Coordinates are pixels throughout; thresholds are pixel distances. All
RANSAC loops draw from a named generator seeded per call, so results are
reproducible bit for bit.
"""

import math

import numpy as np

from .camera import CameraIntrinsics  # re-export for callers
from .geom import Pose, UnitQuaternion, pose_relative, so3_exp, so3_hat
from .kernels import hamming_cdist

__all__ = [
    "CameraIntrinsics",
    "MatchPair",
    "FundamentalResult",
    "PnpResult",
    "LoopVerification",
    "match_descriptors",
    "fundamental_ransac",
    "pnp_ransac",
    "verify_loop",
]


class MatchPair:
    __slots__ = ("index_query", "index_candidate", "hamming_distance")

    def __init__(self, index_query, index_candidate, hamming_distance):
        self.index_query = int(index_query)
        self.index_candidate = int(index_candidate)
        self.hamming_distance = int(hamming_distance)

    def __repr__(self):
        return "MatchPair(%d, %d, d=%d)" % (
            self.index_query,
            self.index_candidate,
            self.hamming_distance,
        )


class FundamentalResult:
    def __init__(self, accepted, reason, inlier_mask, fundamental):
        self.accepted = accepted
        self.reason = reason
        self.inlier_mask = inlier_mask
        self.fundamental = fundamental
        self.num_inliers = int(inlier_mask.sum()) if inlier_mask is not None else 0


class PnpResult:
    def __init__(self, accepted, reason, pose, inlier_mask):
        self.accepted = accepted
        self.reason = reason
        self.pose = pose
        self.inlier_mask = inlier_mask
        self.num_inliers = int(inlier_mask.sum()) if inlier_mask is not None else 0


class LoopVerification:
    """Outcome of the verification funnel for one (query, candidate) pair."""

    def __init__(
        self,
        candidate_id,
        accepted,
        stage,
        inliers,
        relative_pose,
        num_matches,
        num_2d2d,
        num_3d2d,
    ):
        self.candidate_id = candidate_id
        self.accepted = accepted
        self.stage = stage  # matching | fundamental | pnp | accepted
        self.inliers = inliers
        self.relative_pose = relative_pose  # query pose in candidate frame
        self.num_matches = num_matches
        self.num_2d2d = num_2d2d
        self.num_3d2d = num_3d2d


def match_descriptors(query_descs, cand_descs, max_hamming=80):
    """Global-minimum Hamming partner per query descriptor.

    Keeps pairs at distance <= max_hamming. When several queries pick the
    same candidate, only the lowest-distance pair survives; distance ties
    go to the lower query index.
    """
    q = np.ascontiguousarray(query_descs, dtype=np.uint8)
    c = np.ascontiguousarray(cand_descs, dtype=np.uint8)
    if len(q) == 0 or len(c) == 0:
        return []
    d = hamming_cdist(q, c)
    best = np.argmin(d, axis=1)
    dist = d[np.arange(len(q)), best]
    winner = {}
    for qi in range(len(q)):
        if dist[qi] > max_hamming:
            continue
        ci = int(best[qi])
        prev = winner.get(ci)
        if prev is None or dist[qi] < prev[1]:
            winner[ci] = (qi, int(dist[qi]))
    pairs = [MatchPair(qi, ci, dd) for ci, (qi, dd) in winner.items()]
    pairs.sort(key=lambda m: m.index_query)
    return pairs


def _hartley_normalize(uv):
    """Similarity transform sending the centroid to 0 and the mean radius
    to sqrt(2). Returns homogeneous normalized points and the transform."""
    center = uv.mean(axis=0)
    d = np.linalg.norm(uv - center, axis=1).mean()
    if d < 1e-12:
        return None, None
    s = math.sqrt(2.0) / d
    T = np.array([[s, 0.0, -s * center[0]], [0.0, s, -s * center[1]], [0.0, 0.0, 1.0]])
    pts = np.column_stack([uv, np.ones(len(uv))]) @ T.T
    return pts, T


def _eight_point(uv_a, uv_b):
    """Least-squares fundamental matrix with x_b' F x_a = 0, or None."""
    pa, Ta = _hartley_normalize(uv_a)
    pb, Tb = _hartley_normalize(uv_b)
    if pa is None or pb is None:
        return None
    A = np.column_stack(
        [
            pb[:, 0] * pa[:, 0],
            pb[:, 0] * pa[:, 1],
            pb[:, 0],
            pb[:, 1] * pa[:, 0],
            pb[:, 1] * pa[:, 1],
            pb[:, 1],
            pa[:, 0],
            pa[:, 1],
            np.ones(len(pa)),
        ]
    )
    try:
        _, s, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    # no rank guard here: a zero-baseline pair (identical pixel sets) has a
    # multi-dimensional null space, any member of which scores all points
    # as inliers, and bad samples are gated by consensus anyway
    F = vt[-1].reshape(3, 3)
    u, sf, vtf = np.linalg.svd(F)
    F = (u * np.array([sf[0], sf[1], 0.0])) @ vtf
    return Tb.T @ F @ Ta


def _sampson_distance(F, uv_a, uv_b):
    pa = np.column_stack([uv_a, np.ones(len(uv_a))])
    pb = np.column_stack([uv_b, np.ones(len(uv_b))])
    Fa = pa @ F.T  # rows F @ x_a
    Fb = pb @ F  # rows F^T @ x_b
    num = np.square(np.sum(pb * Fa, axis=1))
    den = Fa[:, 0] ** 2 + Fa[:, 1] ** 2 + Fb[:, 0] ** 2 + Fb[:, 1] ** 2
    den = np.maximum(den, 1e-300)
    return np.sqrt(num / den)


def _ransac_needed(inlier_ratio, sample_size, confidence):
    if inlier_ratio <= 0.0:
        return np.inf
    good = inlier_ratio**sample_size
    if good >= 1.0:
        return 0.0
    return math.log(1.0 - confidence) / math.log(1.0 - good)


def fundamental_ransac(
    uv_query,
    uv_cand,
    intrinsics=None,
    iterations=200,
    threshold_px=1.0,
    seed=0,
    confidence=0.99,
):
    """RANSAC over normalized 8-point hypotheses, Sampson-distance inliers."""
    uv_a = np.asarray(uv_query, dtype=np.float64).reshape(-1, 2)
    uv_b = np.asarray(uv_cand, dtype=np.float64).reshape(-1, 2)
    n = len(uv_a)
    if n != len(uv_b):
        raise ValueError("correspondence arrays differ in length")
    if n < 8:
        return FundamentalResult(False, "min-correspondences", np.zeros(n, dtype=bool), None)
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = 0
    needed = float(iterations)
    it = 0
    while it < iterations and it < needed:
        it += 1
        idx = rng.choice(n, 8, replace=False)
        F = _eight_point(uv_a[idx], uv_b[idx])
        if F is None:
            continue
        mask = _sampson_distance(F, uv_a, uv_b) <= threshold_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            needed = _ransac_needed(count / n, 8, confidence)
    if best_count < 8:
        return FundamentalResult(False, "no-model", np.zeros(n, dtype=bool), None)
    F = _eight_point(uv_a[best_mask], uv_b[best_mask])
    if F is not None:
        refit_mask = _sampson_distance(F, uv_a, uv_b) <= threshold_px
        if int(refit_mask.sum()) >= best_count:
            return FundamentalResult(True, "", refit_mask, F)
    F = _eight_point(uv_a[best_mask], uv_b[best_mask])
    return FundamentalResult(True, "", best_mask, F)


def _kabsch(src, dst):
    """Rotation R and translation t with R @ src + t ~= dst."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(H)
    R = vt.T @ u.T
    if np.linalg.det(R) < 0:
        vt = vt.copy()
        vt[-1] *= -1.0
        R = vt.T @ u.T
    return R, cd - R @ cs


def _p3p_grunert(pts3d, bearings):
    """Camera poses (R, t with X_cam = R X + t) fitting 3 points exactly.

    Classic reduction to a quartic in the distance ratio; returns every
    admissible solution, caller disambiguates with a fourth point.
    """
    P1, P2, P3 = pts3d
    a = np.linalg.norm(P2 - P3)
    b = np.linalg.norm(P1 - P3)
    c = np.linalg.norm(P1 - P2)
    if min(a, b, c) < 1e-9:
        return []
    j1, j2, j3 = bearings
    cos_al = float(j2 @ j3)
    cos_be = float(j1 @ j3)
    cos_ga = float(j1 @ j2)
    a2, b2, c2 = a * a, b * b, c * c
    p = (a2 - c2) / b2
    q = (a2 + c2) / b2
    A4 = (p - 1.0) ** 2 - 4.0 * (c2 / b2) * cos_al**2
    A3 = 4.0 * (
        p * (1.0 - p) * cos_be
        - (1.0 - q) * cos_al * cos_ga
        + 2.0 * (c2 / b2) * cos_al**2 * cos_be
    )
    A2 = 2.0 * (
        p * p
        - 1.0
        + 2.0 * p * p * cos_be**2
        + 2.0 * ((b2 - c2) / b2) * cos_al**2
        - 4.0 * q * cos_al * cos_be * cos_ga
        + 2.0 * ((b2 - a2) / b2) * cos_ga**2
    )
    A1 = 4.0 * (
        -p * (1.0 + p) * cos_be
        + 2.0 * (a2 / b2) * cos_ga**2 * cos_be
        - (1.0 - q) * cos_al * cos_ga
    )
    A0 = (1.0 + p) ** 2 - 4.0 * (a2 / b2) * cos_ga**2
    coeffs = np.array([A4, A3, A2, A1, A0])
    if not np.all(np.isfinite(coeffs)) or abs(A4) < 1e-14 * max(1.0, np.abs(coeffs).max()):
        return []
    roots = np.roots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) > 1e-8:
            continue
        v = float(r.real)
        if v <= 0:
            continue
        den = 2.0 * (cos_ga - v * cos_al)
        if abs(den) < 1e-12:
            continue
        u = ((-1.0 + p) * v * v - 2.0 * p * cos_be * v + 1.0 + p) / den
        if u <= 0:
            continue
        s1sq = b2 / (1.0 + v * v - 2.0 * v * cos_be)
        if s1sq <= 0:
            continue
        s1 = math.sqrt(s1sq)
        cam = np.stack([s1 * j1, (u * s1) * j2, (v * s1) * j3])
        R, t = _kabsch(np.stack([P1, P2, P3]), cam)
        out.append((R, t))
    return out


def _dlt_pose(pts3d, uv, intrinsics):
    """Direct linear transform on >= 6 points; returns (R, t) or None."""
    n = len(pts3d)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:3] = pts3d
    A[0::2, 3] = 1.0
    A[0::2, 8:11] = -uv[:, 0:1] * pts3d
    A[0::2, 11] = -uv[:, 0]
    A[1::2, 4:7] = pts3d
    A[1::2, 7] = 1.0
    A[1::2, 8:11] = -uv[:, 1:2] * pts3d
    A[1::2, 11] = -uv[:, 1]
    try:
        _, s, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    if s[-2] < 1e-9 * max(s[0], 1.0):
        return None  # coplanar or collinear sample
    P = vt[-1].reshape(3, 4)
    Kinv = np.linalg.inv(intrinsics.matrix())
    M = Kinv @ P
    u, sv, vtr = np.linalg.svd(M[:, :3])
    if sv[2] < 1e-9 * sv[0]:
        return None
    scale = sv.mean()
    R = u @ vtr
    t = M[:, 3] / scale
    if np.linalg.det(R) < 0:
        R = -R
        t = -t
    # points must sit in front of the camera
    z = (pts3d @ R.T + t)[:, 2]
    if np.median(z) < 0:
        return None
    return R, t


def _project_rt(pts3d, R, t, intrinsics):
    cam = pts3d @ R.T + t
    z = cam[:, 2]
    safe = np.where(np.abs(z) < 1e-12, 1e-12, z)
    u = intrinsics.fx * cam[:, 0] / safe + intrinsics.cx
    v = intrinsics.fy * cam[:, 1] / safe + intrinsics.cy
    return np.column_stack([u, v]), z


def _reprojection_mask(pts3d, uv, R, t, intrinsics, threshold_px):
    proj, z = _project_rt(pts3d, R, t, intrinsics)
    err = np.linalg.norm(proj - uv, axis=1)
    return (z > 1e-6) & (err <= threshold_px)


def _gn_refine_pose(pts3d, uv, intrinsics, R, t, iters=10):
    """Gauss-Newton on reprojection over SE(3), left increment on (R, t)."""
    for _ in range(iters):
        cam = pts3d @ R.T + t
        z = cam[:, 2]
        if np.any(z <= 1e-9):
            break
        fx, fy = intrinsics.fx, intrinsics.fy
        ru = fx * cam[:, 0] / z + intrinsics.cx - uv[:, 0]
        rv = fy * cam[:, 1] / z + intrinsics.cy - uv[:, 1]
        n = len(pts3d)
        J = np.zeros((2 * n, 6))
        iz = 1.0 / z
        iz2 = iz * iz
        # d proj / d cam
        du = np.column_stack([fx * iz, np.zeros(n), -fx * cam[:, 0] * iz2])
        dv = np.column_stack([np.zeros(n), fy * iz, -fy * cam[:, 1] * iz2])
        # d cam / d (dtheta, dt): cam' = exp(dtheta) cam + dt
        for k in range(n):
            dcam = np.hstack([-so3_hat(cam[k]), np.eye(3)])
            J[2 * k] = du[k] @ dcam
            J[2 * k + 1] = dv[k] @ dcam
        r = np.empty(2 * n)
        r[0::2] = ru
        r[1::2] = rv
        H = J.T @ J
        g = J.T @ r
        try:
            delta = np.linalg.solve(H + 1e-12 * np.eye(6), -g)
        except np.linalg.LinAlgError:
            break
        Rd = so3_exp(delta[:3])
        R = Rd @ R
        t = Rd @ t + delta[3:]
        if np.linalg.norm(delta) < 1e-12:
            break
    return R, t


def pnp_ransac(
    points3d,
    obs2d,
    intrinsics,
    iterations=200,
    threshold_px=3.0,
    seed=0,
    confidence=0.99,
):
    """Camera pose from 3D-2D correspondences with RANSAC.

    Hypotheses come from a 6-point DLT when the set allows, else from the
    3-point quartic disambiguated by the fourth sample point. The best
    consensus pose is polished by Gauss-Newton on its inliers. Returns the
    pose of the camera expressed in the frame of the 3D points.
    """
    pts = np.asarray(points3d, dtype=np.float64).reshape(-1, 3)
    uv = np.asarray(obs2d, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n != len(uv):
        raise ValueError("correspondence arrays differ in length")
    if n < 4:
        return PnpResult(False, "min-correspondences", None, np.zeros(n, dtype=bool))
    rng = np.random.default_rng(seed)
    sample_size = 6 if n >= 6 else 4
    Kinv = np.linalg.inv(intrinsics.matrix())
    best = None
    best_count = 0
    needed = float(iterations)
    it = 0
    while it < iterations and it < needed:
        it += 1
        idx = rng.choice(n, sample_size, replace=False)
        hyps = []
        if sample_size == 6:
            rt = _dlt_pose(pts[idx], uv[idx], intrinsics)
            if rt is not None:
                hyps.append(rt)
        else:
            h = np.column_stack([uv[idx[:3]], np.ones(3)]) @ Kinv.T
            h /= np.linalg.norm(h, axis=1, keepdims=True)
            for R, t in _p3p_grunert(pts[idx[:3]], h):
                proj, z = _project_rt(pts[idx[3:]], R, t, intrinsics)
                if z[0] > 0 and np.linalg.norm(proj[0] - uv[idx[3]]) <= threshold_px:
                    hyps.append((R, t))
        for R, t in hyps:
            mask = _reprojection_mask(pts, uv, R, t, intrinsics, threshold_px)
            count = int(mask.sum())
            if count > best_count:
                best_count = count
                best = (R, t, mask)
                needed = _ransac_needed(count / n, sample_size, confidence)
    if best is None or best_count < 4:
        return PnpResult(False, "no-model", None, np.zeros(n, dtype=bool))
    R, t, mask = best
    R, t = _gn_refine_pose(pts[mask], uv[mask], intrinsics, R, t)
    refined_mask = _reprojection_mask(pts, uv, R, t, intrinsics, threshold_px)
    if int(refined_mask.sum()) >= best_count:
        mask = refined_mask
    pose = Pose(-R.T @ t, UnitQuaternion.from_rotation_matrix(R.T))
    return PnpResult(True, "", pose, mask)


def verify_loop(query, candidate, intrinsics, config):
    """Run the match / 2D-2D / 3D-2D funnel for one candidate.

    The 3D points live in the query's world; PnP therefore estimates the
    candidate camera's pose in that world, and the returned relative pose
    places the query camera in the candidate camera's frame.
    """
    matches = match_descriptors(query.descriptors, candidate.descriptors, config.max_hamming)
    nm = len(matches)
    if nm < 8:
        return LoopVerification(
            candidate.frame_id, False, "matching", [], None, nm, 0, 0
        )
    qi = np.array([m.index_query for m in matches])
    ci = np.array([m.index_candidate for m in matches])
    fr = fundamental_ransac(
        query.uv[qi],
        candidate.uv[ci],
        intrinsics,
        iterations=config.ransac_iterations,
        threshold_px=config.epipolar_threshold_px,
        seed=config.seed,
        confidence=config.ransac_confidence,
    )
    if not fr.accepted:
        return LoopVerification(
            candidate.frame_id, False, "fundamental", [], None, nm, 0, 0
        )
    keep = np.flatnonzero(fr.inlier_mask)
    pr = pnp_ransac(
        query.points3d[qi[keep]],
        candidate.uv[ci[keep]],
        intrinsics,
        iterations=config.ransac_iterations,
        threshold_px=config.pnp_threshold_px,
        seed=config.seed,
        confidence=config.ransac_confidence,
    )
    n2d = fr.num_inliers
    if not pr.accepted:
        return LoopVerification(
            candidate.frame_id, False, "pnp", [], None, nm, n2d, 0
        )
    final_idx = keep[pr.inlier_mask]
    inliers = [matches[i] for i in final_idx]
    n3d = len(inliers)
    if n3d < config.min_loop_inliers:
        return LoopVerification(
            candidate.frame_id, False, "pnp", inliers, None, nm, n2d, n3d
        )
    rel = pose_relative(pr.pose, query.pose)
    return LoopVerification(
        candidate.frame_id, True, "accepted", inliers, rel, nm, n2d, n3d
    )
