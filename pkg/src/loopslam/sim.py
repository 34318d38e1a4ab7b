"""Deterministic simulator: ground-truth trajectories, landmarks, drifted
odometry, rendered sprite frames, and ready-to-use keyframes.

Drift is injected only in x, y, z, and yaw. Roll and pitch are copied from
ground truth at the Euler-angle level, where the claim "drift-free
directions" is literally true and testable bitwise.
"""

import hashlib
import math
import struct

import numpy as np

from .camera import CameraIntrinsics, Keyframe, project_world
from .geom import Pose, UnitQuaternion, YprAngles, quat_to_ypr, ypr_to_quat, ypr_to_rot
from .imgproc import BORDER_MARGIN, GrayImage, compute_brief, detect_fast

DEPTH_MIN = 0.5
DEPTH_MAX = 50.0

# camera-to-world at tangent yaw 0: camera z looks along world +x,
# camera x points right (world -y), camera y points down (world -z)
_CAM_BASE = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


class SimConfig:
    """Flat simulator configuration. See from_dict for the key=value names."""

    FIELDS = {
        "kind": ("circle", str),
        "waypoint_file": ("", str),
        "keyframes": (200, int),
        "spacing": (1.0, float),
        "laps": (1, int),
        "start_angle": (0.0, float),
        "landmarks": (1200, int),
        "landmark_band": (8.0, float),
        "landmark_height": (3.0, float),
        "landmark_seed": (-1, int),  # -1: follow seed
        "drift_yaw_std": (0.0, float),
        "drift_pos_std": (0.0, float),
        "pixel_noise_std": (0.0, float),
        "tilt_amp": (0.1, float),
        "fast_threshold": (20, int),
        "fast_target": (500, int),
        "image_width": (640, int),
        "image_height": (480, int),
        "fx": (554.2562584220407, float),
        "fy": (554.2562584220407, float),
        "cx": (319.5, float),
        "cy": (239.5, float),
        "seed": (0, int),
    }

    def __init__(self, **kw):
        for name, (default, conv) in self.FIELDS.items():
            setattr(self, name, conv(kw.pop(name, default)))
        if kw:
            raise ValueError("unknown sim config keys: %s" % ", ".join(sorted(kw)))
        if self.keyframes < 2 or self.landmarks < 0 or self.laps < 1:
            raise ValueError("counts out of range")
        if min(self.drift_yaw_std, self.drift_pos_std, self.pixel_noise_std) < 0:
            raise ValueError("noise/drift rates must be non-negative")
        if self.kind not in ("circle", "figure-eight", "waypoints"):
            raise ValueError("kind must be circle, figure-eight, or waypoints")

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.FIELDS}
        return cls(**known)

    def intrinsics(self):
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy)


class SimWorld:
    """Ground truth: poses, Euler angles, landmarks, per-frame visibility."""

    def __init__(self, cfg, poses, ypr, landmarks, visible_ids, visible_uv):
        self.cfg = cfg
        self.poses = poses
        self.ypr = ypr  # (N, 3) yaw, pitch, roll
        self.landmarks = landmarks  # (M, 3)
        self.visible_ids = visible_ids  # list of (Vk,) int64
        self.visible_uv = visible_uv  # list of (Vk, 2) float64, noise-free

    def __len__(self):
        return len(self.poses)


class OdometryTrack:
    """Drifted odometry: poses, Euler angles (pitch/roll shared with ground
    truth bitwise), and per-step relative measurements that compose back to
    the drifted trajectory."""

    def __init__(self, poses, ypr, rel_measurements):
        self.poses = poses
        self.ypr = ypr
        self.rel_measurements = rel_measurements

    def __len__(self):
        return len(self.poses)


def _lap_index(cfg):
    """Frame index folded to one lap so revisits repeat poses bitwise."""
    n = cfg.keyframes
    if cfg.laps > 1 and n % cfg.laps == 0:
        per = n // cfg.laps
        return np.arange(n) % per, per
    return np.arange(n), n // cfg.laps if cfg.laps > 1 else n


def _path_points(cfg):
    """Closed-form path samples plus tangent yaw per keyframe."""
    n = cfg.keyframes
    if cfg.kind == "circle":
        total = n * cfg.spacing
        radius = total / (2.0 * math.pi * cfg.laps)
        idx, per = _lap_index(cfg)
        ang = cfg.start_angle + 2.0 * math.pi * idx / per
        pts = np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)])
        tangent_yaw = ang + math.pi / 2.0
        return pts, tangent_yaw
    if cfg.kind == "figure-eight":
        # Gerono lemniscate, arc-length resampled so spacing is honest
        t = np.linspace(0.0, 2.0 * math.pi, 20001)
        unit = np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
        seg = np.linalg.norm(np.diff(unit, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        scale = n * cfg.spacing / (arc[-1] * cfg.laps)
        lap_len = arc[-1] * scale
        start = cfg.start_angle / (2.0 * math.pi) * lap_len
        idx, _ = _lap_index(cfg)
        want = (start + idx * cfg.spacing) % lap_len

        def at(s):
            a = (s / scale) % arc[-1]
            return np.column_stack(
                [np.interp(a, arc, unit[:, 0]) * scale, np.interp(a, arc, unit[:, 1]) * scale]
            )

        xy = at(want)
        pts = np.column_stack([xy, np.zeros(n)])
        d = at(want + 1e-4) - xy
        tangent_yaw = np.arctan2(d[:, 1], d[:, 0])
        return pts, tangent_yaw
    # waypoints
    try:
        wp = np.loadtxt(cfg.waypoint_file, dtype=np.float64, ndmin=2)
    except OSError as e:
        raise ValueError("waypoint file %r: %s" % (cfg.waypoint_file, e))
    if wp.ndim != 2 or wp.shape[1] != 3 or wp.shape[0] < 2:
        raise ValueError("waypoint file %r needs >= 2 rows of x y z" % cfg.waypoint_file)
    seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    if np.any(seg <= 0):
        raise ValueError("waypoint file %r has zero-length segments" % cfg.waypoint_file)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    want = np.arange(n) * cfg.spacing
    if want[-1] > arc[-1]:
        raise ValueError(
            "waypoint path %.3f m too short for %d keyframes at %.3f m"
            % (arc[-1], n, cfg.spacing)
        )
    pts = np.column_stack([np.interp(want, arc, wp[:, i]) for i in range(3)])
    ahead = np.minimum(want + 1e-4, arc[-1])
    nxt = np.column_stack([np.interp(ahead, arc, wp[:, i]) for i in range(3)])
    d = nxt - pts
    tangent_yaw = np.arctan2(d[:, 1], d[:, 0])
    return pts, tangent_yaw


def _gt_orientations(cfg, tangent_yaw):
    """Per-keyframe camera-to-world rotations with small view oscillations.

    The camera looks along the tangent. A slow tilt about the camera right
    axis shows up as Euler roll, a tilt about the optical axis as Euler
    pitch; both stay well clear of the |pitch| = 90 deg singularity.
    """
    n = len(tangent_yaw)
    idx, per = _lap_index(cfg)
    phase = 2.0 * math.pi * 3.0 * idx / per
    tilt_a = cfg.tilt_amp * np.sin(phase + 0.7)
    tilt_c = cfg.tilt_amp * np.sin(2.0 * phase + 1.3)
    ypr = np.empty((n, 3))
    for k in range(n):
        cz, sz = math.cos(tangent_yaw[k]), math.sin(tangent_yaw[k])
        rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
        ca, sa = math.cos(tilt_a[k]), math.sin(tilt_a[k])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
        cc, sc = math.cos(tilt_c[k]), math.sin(tilt_c[k])
        rc = np.array([[cc, -sc, 0.0], [sc, cc, 0.0], [0.0, 0.0, 1.0]])
        r = rz @ _CAM_BASE @ rx @ rc
        e = quat_to_ypr(UnitQuaternion.from_rotation_matrix(r))
        ypr[k] = (e.yaw, e.pitch, e.roll)
    return ypr


def _place_landmarks(cfg, pts):
    if cfg.landmarks == 0:
        return np.zeros((0, 3))
    seed = cfg.landmark_seed if cfg.landmark_seed >= 0 else cfg.seed
    rng = np.random.default_rng([seed, 0])
    m = cfg.landmarks
    if cfg.kind == "circle":
        radius = float(np.hypot(pts[0, 0], pts[0, 1]))
        rin = max(radius - cfg.landmark_band, 0.0)
        rout = radius + cfg.landmark_band
        rr = np.sqrt(rng.uniform(rin * rin, rout * rout, m))
        aa = rng.uniform(-math.pi, math.pi, m)
        xy = np.column_stack([rr * np.cos(aa), rr * np.sin(aa)])
    else:
        anchor = pts[rng.integers(0, len(pts), m), :2]
        xy = anchor + rng.uniform(-cfg.landmark_band, cfg.landmark_band, (m, 2))
    z = rng.uniform(-cfg.landmark_height, cfg.landmark_height, m)
    return np.column_stack([xy, z])


def generate_world(cfg):
    """Build ground-truth poses, landmarks, and per-frame visibility.

    Every (frame, landmark) pair listed as visible projects inside the
    image with a 20 px border margin at depth in [0.5, 50] m.
    """
    pts, tangent_yaw = _path_points(cfg)
    ypr = _gt_orientations(cfg, tangent_yaw)
    poses = [
        Pose(pts[k], ypr_to_quat(YprAngles(ypr[k, 0], ypr[k, 1], ypr[k, 2])))
        for k in range(cfg.keyframes)
    ]
    landmarks = _place_landmarks(cfg, pts)
    intr = cfg.intrinsics()
    lo_u, hi_u = BORDER_MARGIN, cfg.image_width - 1 - BORDER_MARGIN
    lo_v, hi_v = BORDER_MARGIN, cfg.image_height - 1 - BORDER_MARGIN
    visible_ids, visible_uv = [], []
    for k in range(cfg.keyframes):
        if len(landmarks) == 0:
            visible_ids.append(np.zeros(0, dtype=np.int64))
            visible_uv.append(np.zeros((0, 2)))
            continue
        uv, depth = project_world(landmarks, poses[k], intr)
        ok = (
            (depth >= DEPTH_MIN)
            & (depth <= DEPTH_MAX)
            & (uv[:, 0] >= lo_u)
            & (uv[:, 0] <= hi_u)
            & (uv[:, 1] >= lo_v)
            & (uv[:, 1] <= hi_v)
        )
        ids = np.flatnonzero(ok).astype(np.int64)
        visible_ids.append(ids)
        visible_uv.append(uv[ids])
    return SimWorld(cfg, poses, ypr, landmarks, visible_ids, visible_uv)


def simulate_odometry(world, cfg):
    """Inject random-walk drift into x, y, z, yaw only.

    Yaw accumulates a scalar walk; roll and pitch columns are the ground
    truth arrays untouched. Position steps are taken in the true body
    frame, perturbed, then re-applied through the drifted orientation, so
    pure yaw drift bends the path without stretching it. Per-axis position
    noise uses std drift_pos_std / sqrt(3) so the step noise vector norm
    has rms drift_pos_std.
    """
    n = len(world)
    rng = np.random.default_rng([cfg.seed, 1])
    yaw_noise = rng.normal(0.0, cfg.drift_yaw_std, n - 1)
    pos_noise = rng.normal(0.0, cfg.drift_pos_std / math.sqrt(3.0), (n - 1, 3))
    yaw = world.ypr[:, 0].copy()
    walk = 0.0
    for k in range(1, n):
        walk += yaw_noise[k - 1]
        yaw[k] = world.ypr[k, 0] + walk
    ypr = np.column_stack([yaw, world.ypr[:, 1], world.ypr[:, 2]])

    quats = [ypr_to_quat(YprAngles(ypr[k, 0], ypr[k, 1], ypr[k, 2])) for k in range(n)]
    poses = [Pose(world.poses[0].p.copy(), quats[0])]
    for k in range(n - 1):
        r_gt = world.poses[k].q.rotation_matrix()
        step_body = r_gt.T @ (world.poses[k + 1].p - world.poses[k].p)
        step_body = step_body + pos_noise[k]
        p_next = poses[k].p + quats[k].rotation_matrix() @ step_body
        poses.append(Pose(p_next, quats[k + 1]))

    rel = [
        Pose(
            poses[k].q.rotation_matrix().T @ (poses[k + 1].p - poses[k].p),
            poses[k].q.conjugate().multiply(poses[k + 1].q),
        )
        for k in range(n - 1)
    ]
    return OdometryTrack(poses, ypr, rel)


_SPRITE_CACHE = {}


def sprite_pattern(landmark_id):
    """Deterministic 5x5 texture for one landmark, bright on black."""
    pat = _SPRITE_CACHE.get(landmark_id)
    if pat is None:
        rng = np.random.default_rng([7, int(landmark_id)])
        pat = rng.integers(60, 256, (5, 5)).astype(np.uint8)
        pat[2, 2] = 255
        _SPRITE_CACHE[landmark_id] = pat
    return pat


def render_sprite_frame(world, frame_index, cfg=None):
    """Paint each visible landmark as its 5x5 sprite, max-blended on black.

    Appearance is view-independent by design: the same landmark renders
    the same texture from every pose, so revisits can be matched.
    """
    cfg = cfg or world.cfg
    img = np.zeros((cfg.image_height, cfg.image_width), dtype=np.uint8)
    ids = world.visible_ids[frame_index]
    uv = world.visible_uv[frame_index]
    for i in range(len(ids)):
        cu = int(round(float(uv[i, 0])))
        cv = int(round(float(uv[i, 1])))
        pat = sprite_pattern(int(ids[i]))
        u0, v0 = cu - 2, cv - 2
        region = img[v0 : v0 + 5, u0 : u0 + 5]
        np.maximum(region, pat, out=region)
    return GrayImage(img)


def idhash_descriptor(landmark_id):
    """32-byte stand-in descriptor: sha256 of the landmark id."""
    digest = hashlib.sha256(struct.pack("<q", int(landmark_id))).digest()
    return np.frombuffer(digest, dtype=np.uint8).copy()


def _associate(corners_uv, proj_uv, max_px=4.0):
    """Nearest projected landmark within max_px for each corner, -1 if none."""
    if len(corners_uv) == 0 or len(proj_uv) == 0:
        return np.full(len(corners_uv), -1, dtype=np.int64)
    d = np.linalg.norm(corners_uv[:, None, :] - proj_uv[None, :, :], axis=2)
    best = np.argmin(d, axis=1)
    out = np.where(d[np.arange(len(corners_uv)), best] <= max_px, best, -1)
    return out.astype(np.int64)


def make_keyframes(world, track, cfg=None, mode="idhash", id_offset=0):
    """Assemble keyframes the back end consumes.

    Each keyframe carries the drifted pose, pixel observations (exact
    projection plus seeded noise), landmark points rewritten into the
    drifted world (rigidly attached to the drifted pose), and descriptors.
    idhash mode hashes the landmark id; rendered mode runs the corner
    detector and describer on the sprite frame and keeps only corners that
    land within 4 px of a projected landmark, best score per landmark, so
    descriptors carry real image statistics while observations stay at
    survey accuracy.
    """
    cfg = cfg or world.cfg
    rng = np.random.default_rng([cfg.seed, 2])
    frames = []
    for k in range(len(world)):
        ids = world.visible_ids[k]
        uv = world.visible_uv[k].copy()
        if cfg.pixel_noise_std > 0 and len(uv):
            uv = uv + rng.normal(0.0, cfg.pixel_noise_std, uv.shape)
        r_gt = world.poses[k].q.rotation_matrix()
        r_dr = track.poses[k].q.rotation_matrix()
        pts_body = (world.landmarks[ids] - world.poses[k].p) @ r_gt
        pts_drift = pts_body @ r_dr.T + track.poses[k].p

        if mode == "idhash":
            desc = (
                np.stack([idhash_descriptor(i) for i in ids])
                if len(ids)
                else np.zeros((0, 32), dtype=np.uint8)
            )
            keep = np.arange(len(ids))
        elif mode == "rendered":
            img = render_sprite_frame(world, k, cfg)
            kps = detect_fast(img, cfg.fast_threshold, cfg.fast_target)
            corners = np.array([[kp.u, kp.v] for kp in kps], dtype=np.float64).reshape(-1, 2)
            assoc = _associate(corners, world.visible_uv[k])
            best_for_lm = {}
            for ci, li in enumerate(assoc):
                if li >= 0 and li not in best_for_lm:
                    best_for_lm[li] = ci  # kps sorted by score, first wins
            keep = np.array(sorted(best_for_lm.keys()), dtype=np.int64)
            chosen = [kps[best_for_lm[li]] for li in keep]
            desc = (
                compute_brief(img, chosen)
                if chosen
                else np.zeros((0, 32), dtype=np.uint8)
            )
        else:
            raise ValueError("mode must be idhash or rendered")

        frames.append(
            Keyframe(
                frame_id=k + id_offset,
                timestamp=float(k + id_offset),
                pose=track.poses[k],
                uv=uv[keep],
                points3d=pts_drift[keep],
                descriptors=desc,
                landmark_ids=ids[keep],
            )
        )
    return frames
