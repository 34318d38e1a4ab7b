"""Rotation and pose algebra shared by every other module.

Conventions, fixed once so the rest of the toolkit never has to argue:

* Quaternions are Hamilton, stored (w, x, y, z), unit norm, and kept with
  w >= 0 (ties broken by the first nonzero of x, y, z being positive) so
  each rotation has exactly one serialized form.
* Euler angles are intrinsic Z-Y-X: R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
  Yaw is the outermost factor, which is what lets the pose graph freeze
  roll/pitch and keep a clean single angle about the gravity axis.
* A Pose maps body coordinates into the parent frame: x_w = R @ x_b + p.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]. Accepts scalars or ndarrays."""
    r = np.remainder(np.asarray(a, dtype=np.float64) + np.pi, TWO_PI) - np.pi
    r = np.where(r <= -np.pi, r + TWO_PI, r)
    if np.ndim(a) == 0:
        return float(r)
    return r


class UnitQuaternion:
    """Unit quaternion (w, x, y, z), normalized and sign-canonicalized.

    The constructor always renormalizes and flips sign so w >= 0; if w == 0
    the first nonzero of (x, y, z) is made positive. Inputs with norm far
    from 1 are accepted (they are directions, we only keep the rotation).
    """

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w, x, y, z):
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if not (n > 1e-12 and math.isfinite(n)):
            raise ValueError("quaternion has zero or non-finite norm")
        w, x, y, z = w / n, x / n, y / n, z / n
        if w < 0.0 or (w == 0.0 and (x < 0.0 or (x == 0.0 and (y < 0.0 or (y == 0.0 and z < 0.0))))):
            w, x, y, z = -w, -x, -y, -z
        self.w, self.x, self.y, self.z = w, x, y, z

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_normalized(cls, w, x, y, z):
        """Wrap components verbatim, trusting the caller's normalization.

        Deserialization uses this so that already-canonical stored values
        survive a load/save cycle bit-for-bit (renormalizing can perturb
        the last ulp).
        """
        q = object.__new__(cls)
        q.w, q.x, q.y, q.z = float(w), float(x), float(y), float(z)
        return q

    @classmethod
    def from_rotation_matrix(cls, R):
        """Shepperd's method: pick the largest diagonal combination.

        Numerically safe for every rotation, including trace <= 0.
        """
        R = np.asarray(R, dtype=np.float64)
        t = R[0, 0] + R[1, 1] + R[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            w = 0.25 * s
            x = (R[2, 1] - R[1, 2]) / s
            y = (R[0, 2] - R[2, 0]) / s
            z = (R[1, 0] - R[0, 1]) / s
        elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            w = (R[2, 1] - R[1, 2]) / s
            x = 0.25 * s
            y = (R[0, 1] + R[1, 0]) / s
            z = (R[0, 2] + R[2, 0]) / s
        elif R[1, 1] >= R[2, 2]:
            s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            w = (R[0, 2] - R[2, 0]) / s
            x = (R[0, 1] + R[1, 0]) / s
            y = 0.25 * s
            z = (R[1, 2] + R[2, 1]) / s
        else:
            s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            w = (R[1, 0] - R[0, 1]) / s
            x = (R[0, 2] + R[2, 0]) / s
            y = (R[1, 2] + R[2, 1]) / s
            z = 0.25 * s
        return cls(w, x, y, z)

    # -- algebra -----------------------------------------------------------

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def multiply(self, o):
        """Hamilton product self * o (apply o first, then self)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = o.w, o.x, o.y, o.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self):
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotation_matrix(self):
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotate(self, v):
        """Rotate one 3-vector or an (N, 3) stack."""
        v = np.asarray(v, dtype=np.float64)
        return v @ self.rotation_matrix().T

    def __repr__(self):
        return "UnitQuaternion(%.9g, %.9g, %.9g, %.9g)" % (self.w, self.x, self.y, self.z)


class YprAngles:
    """Yaw/pitch/roll triple for the intrinsic Z-Y-X factorization."""

    __slots__ = ("yaw", "pitch", "roll")

    def __init__(self, yaw, pitch, roll):
        self.yaw = float(yaw)
        self.pitch = float(pitch)
        self.roll = float(roll)

    def __iter__(self):
        return iter((self.yaw, self.pitch, self.roll))

    def __repr__(self):
        return "YprAngles(yaw=%.9g, pitch=%.9g, roll=%.9g)" % (self.yaw, self.pitch, self.roll)


def ypr_to_rot(a):
    """Rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll), written out."""
    cy, sy = math.cos(a.yaw), math.sin(a.yaw)
    cp, sp = math.cos(a.pitch), math.sin(a.pitch)
    cr, sr = math.cos(a.roll), math.sin(a.roll)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def ypr_to_quat(a):
    """Same factorization as ypr_to_rot, composed from elementary quaternions."""
    qz = UnitQuaternion(math.cos(0.5 * a.yaw), 0.0, 0.0, math.sin(0.5 * a.yaw))
    qy = UnitQuaternion(math.cos(0.5 * a.pitch), 0.0, math.sin(0.5 * a.pitch), 0.0)
    qx = UnitQuaternion(math.cos(0.5 * a.roll), math.sin(0.5 * a.roll), 0.0, 0.0)
    return qz.multiply(qy).multiply(qx)


def quat_to_ypr(q):
    """Decompose q into intrinsic Z-Y-X angles.

    Away from gimbal lock this inverts ypr_to_rot exactly. Within
    |cos(pitch)| < 1e-6 of the lock, yaw and roll are not separable; we
    conventionally set roll = 0 and fold the remainder into yaw. The
    simulator keeps |pitch| <= 60 deg, so that branch is defensive only.
    """
    R = q.rotation_matrix()
    sp = -R[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(math.cos(pitch)) < 1e-6:
        yaw = math.atan2(-R[0, 1], R[1, 1])
        roll = 0.0
    else:
        yaw = math.atan2(R[1, 0], R[0, 0])
        roll = math.atan2(R[2, 1], R[2, 2])
    return YprAngles(wrap_angle(yaw), pitch, wrap_angle(roll))


class Pose:
    """Rigid transform: x_parent = orientation * x_body + position."""

    __slots__ = ("position", "orientation")

    def __init__(self, position, orientation):
        self.position = np.array(position, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(self.position)):
            raise ValueError("pose position must be finite")
        self.orientation = orientation

    # short aliases; the optimizers index these constantly
    @property
    def p(self):
        return self.position

    @property
    def q(self):
        return self.orientation

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), UnitQuaternion.identity())

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.orientation.rotation_matrix()
        T[:3, 3] = self.position
        return T

    def transform(self, pts):
        """Apply to one point or an (N, 3) stack."""
        return self.orientation.rotate(pts) + self.position

    def __repr__(self):
        return "Pose(p=%s, q=%s)" % (np.array2string(self.position, precision=6), self.orientation)


def pose_compose(a, b):
    """a then-applied-to b: the transform that first does b, then a."""
    return Pose(a.orientation.rotate(b.position) + a.position, a.orientation.multiply(b.orientation))


def pose_inverse(a):
    qi = a.orientation.conjugate()
    return Pose(-qi.rotate(a.position), qi)


def pose_relative(a, b):
    """Pose of b expressed in a's frame: inverse(a) composed with b."""
    return pose_compose(pose_inverse(a), b)


def so3_hat(w):
    """Skew matrix of a 3-vector."""
    return np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )


def so3_exp(w):
    """Rodrigues map from a rotation vector to a rotation matrix."""
    w = np.asarray(w, dtype=np.float64)
    theta = float(np.linalg.norm(w))
    K = so3_hat(w)
    if theta < 1e-8:
        # second-order Taylor keeps orthogonality to ~theta^3
        return np.eye(3) + K + 0.5 * (K @ K)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R):
    """Rotation vector of a rotation matrix, angle in [0, pi].

    Goes through the quaternion so the result stays well conditioned near
    both the identity and half-turn rotations.
    """
    q = UnitQuaternion.from_rotation_matrix(np.asarray(R, dtype=np.float64))
    xyz = np.array([q.x, q.y, q.z])
    n = float(np.linalg.norm(xyz))
    if n < 1e-12:
        return 2.0 * xyz / q.w
    theta = 2.0 * math.atan2(n, q.w)
    return xyz * (theta / n)
