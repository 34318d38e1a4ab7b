"""Pinhole camera model and the Keyframe record shared across modules.

Camera frame follows the usual CV convention: z forward, x right, y down.
A camera Pose maps camera coordinates into the world, x_w = R x_c + p.
"""

import numpy as np


class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    __slots__ = ("fx", "fy", "cx", "cy")

    def __init__(self, fx, fy, cx, cy):
        if fx <= 0 or fy <= 0:
            raise ValueError("focal lengths must be positive")
        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)

    def matrix(self):
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def project(self, pts_cam):
        """Project (N, 3) camera-frame points to (N, 2) pixels. Caller
        guarantees positive depth."""
        pts_cam = np.asarray(pts_cam, dtype=np.float64)
        z = pts_cam[..., 2]
        u = self.fx * pts_cam[..., 0] / z + self.cx
        v = self.fy * pts_cam[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1)

    def __repr__(self):
        return "CameraIntrinsics(fx=%.6g, fy=%.6g, cx=%.6g, cy=%.6g)" % (
            self.fx, self.fy, self.cx, self.cy,
        )


def project_world(points_w, cam_pose, intrinsics):
    """World points -> pixel coordinates seen from cam_pose. Returns
    (pixels, depths); callers filter on depth themselves."""
    R = cam_pose.orientation.rotation_matrix()
    pts_c = (np.asarray(points_w, dtype=np.float64) - cam_pose.position) @ R
    return intrinsics.project(pts_c), pts_c[..., 2]


class Keyframe:
    """One pipeline unit: pose plus observed features.

    uv          (N, 2) float64 pixel observations
    points3d    (N, 3) float64 feature positions in the odometry world frame
    descriptors (N, 32) uint8
    landmark_ids (N,) int64 simulator bookkeeping (ground-truth identity,
                 never consumed by the estimation path)
    """

    __slots__ = ("frame_id", "timestamp", "pose", "uv", "points3d", "descriptors", "landmark_ids")

    def __init__(self, frame_id, timestamp, pose, uv, points3d, descriptors, landmark_ids=None):
        n = len(uv)
        self.frame_id = int(frame_id)
        self.timestamp = float(timestamp)
        self.pose = pose
        self.uv = np.asarray(uv, dtype=np.float64).reshape(n, 2)
        self.points3d = np.asarray(points3d, dtype=np.float64).reshape(n, 3)
        self.descriptors = np.asarray(descriptors, dtype=np.uint8).reshape(n, 32)
        if landmark_ids is None:
            self.landmark_ids = np.full(n, -1, dtype=np.int64)
        else:
            self.landmark_ids = np.asarray(landmark_ids, dtype=np.int64).reshape(n)

    def __len__(self):
        return self.uv.shape[0]

    def __repr__(self):
        return "Keyframe(id=%d, features=%d)" % (self.frame_id, len(self))
