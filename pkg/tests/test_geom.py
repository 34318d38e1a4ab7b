"""Geometry tests. Oracles: scipy.spatial.transform and explicit elementary
matrices, both independent of the code under test."""

import math

import numpy as np
from scipy.spatial.transform import Rotation

from loopslam.geom import (
    so3_exp,
    so3_log,
    Pose,
    UnitQuaternion,
    YprAngles,
    pose_compose,
    pose_inverse,
    pose_relative,
    quat_to_ypr,
    wrap_angle,
    ypr_to_quat,
    ypr_to_rot,
)


def _Rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _Ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _Rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _random_quats(rng, n):
    v = rng.normal(size=(n, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_quat_normalized_and_canonical():
    rng = np.random.default_rng(1)
    for raw in rng.normal(size=(2000, 4)):
        q = UnitQuaternion(*raw)
        n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
        assert abs(n - 1.0) < 1e-9
        assert q.w >= 0.0
    # w == 0 tie-break: first nonzero of (x, y, z) positive
    q = UnitQuaternion(0.0, -1.0, 0.0, 0.0)
    assert (q.w, q.x) == (0.0, 1.0)
    q = UnitQuaternion(0.0, 0.0, 0.0, -1.0)
    assert (q.w, q.z) == (0.0, 1.0)


def test_quat_rotation_matrix_matches_scipy():
    rng = np.random.default_rng(2)
    for w, x, y, z in _random_quats(rng, 2000):
        q = UnitQuaternion(w, x, y, z)
        R_ref = Rotation.from_quat([q.x, q.y, q.z, q.w]).as_matrix()
        assert np.allclose(q.rotation_matrix(), R_ref, atol=1e-12)


def test_quat_multiply_matches_scipy():
    rng = np.random.default_rng(3)
    qs = _random_quats(rng, 1000)
    for (a, b) in zip(qs[::2], qs[1::2]):
        qa, qb = UnitQuaternion(*a), UnitQuaternion(*b)
        prod = qa.multiply(qb).rotation_matrix()
        ref = (
            Rotation.from_quat([qa.x, qa.y, qa.z, qa.w])
            * Rotation.from_quat([qb.x, qb.y, qb.z, qb.w])
        ).as_matrix()
        assert np.allclose(prod, ref, atol=1e-12)


def test_from_rotation_matrix_round_trip():
    rng = np.random.default_rng(4)
    for w, x, y, z in _random_quats(rng, 2000):
        q = UnitQuaternion(w, x, y, z)
        q2 = UnitQuaternion.from_rotation_matrix(q.rotation_matrix())
        assert np.allclose(q.as_array(), q2.as_array(), atol=1e-9)
    # exercise every Shepperd branch with near-pi rotations about each axis
    for axis in np.eye(3):
        R_ref = Rotation.from_rotvec(axis * (math.pi - 1e-3)).as_matrix()
        q = UnitQuaternion.from_rotation_matrix(R_ref)
        assert np.allclose(q.rotation_matrix(), R_ref, atol=1e-9)


def test_ypr_to_rot_trivial():
    assert np.allclose(ypr_to_rot(YprAngles(0, 0, 0)), np.eye(3), atol=1e-15)
    expect = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    assert np.allclose(ypr_to_rot(YprAngles(math.pi / 2, 0, 0)), expect, atol=1e-15)


def test_ypr_to_rot_frozen_value():
    # frozen from scipy Rotation.from_euler('ZYX', [0.3, -0.2, 0.9])
    expect = np.array(
        [
            [0.9362933635841993, -0.3323706681920001, 0.1135098067736434],
            [0.2896294776255156, 0.547856933840599, -0.7848359992591757],
            [0.19866933079506122, 0.7677125236495633, 0.6092191543550329],
        ]
    )
    assert np.allclose(ypr_to_rot(YprAngles(0.3, -0.2, 0.9)), expect, atol=1e-15)


def test_ypr_to_rot_matches_elementary_product():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        y, p, r = rng.uniform(-math.pi, math.pi, 3)
        p *= 0.499
        R = ypr_to_rot(YprAngles(y, p, r))
        assert np.allclose(R, _Rz(y) @ _Ry(p) @ _Rx(r), atol=1e-13)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_quat_to_ypr_trivial():
    a = quat_to_ypr(UnitQuaternion.identity())
    assert (a.yaw, a.pitch, a.roll) == (0.0, 0.0, 0.0)
    qz = UnitQuaternion(math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4))
    a = quat_to_ypr(qz)
    assert abs(a.yaw - math.pi / 2) < 1e-12
    assert abs(a.pitch) < 1e-12 and abs(a.roll) < 1e-12


def test_quat_to_ypr_frozen_value():
    # frozen from scipy as_euler('ZYX') of normalize(0.8, 0.3, -0.4, 0.2)
    q = UnitQuaternion(0.8, 0.3, -0.4, 0.2)
    a = quat_to_ypr(q)
    assert abs(a.yaw - 0.1498124565728974) < 1e-12
    assert abs(a.pitch - -0.9565434900327511) < 1e-12
    assert abs(a.roll - 0.6397697828266257) < 1e-12


def test_ypr_round_trip_10k():
    rng = np.random.default_rng(6)
    count = 0
    for w, x, y, z in _random_quats(rng, 20000):
        q = UnitQuaternion(w, x, y, z)
        a = quat_to_ypr(q)
        if abs(a.pitch) >= math.pi / 2 - 1e-3:
            continue
        count += 1
        assert np.allclose(ypr_to_rot(a), q.rotation_matrix(), atol=1e-9)
        assert -math.pi < a.yaw <= math.pi
        assert -math.pi / 2 <= a.pitch <= math.pi / 2
        assert -math.pi < a.roll <= math.pi
    assert count >= 10000


def test_quat_to_ypr_gimbal_lock_folds_roll():
    # pitch at +-pi/2: roll reported as 0 and the composition still
    # reproduces q. asin amplifies rounding to ~sqrt(eps) at the exact
    # singularity, so the tolerance here is looser than the generic 1e-9.
    for sign in (+1.0, -1.0):
        for yaw in (-2.0, 0.3, 3.0):
            q = ypr_to_quat(YprAngles(yaw, sign * math.pi / 2, 0.7))
            a = quat_to_ypr(q)
            assert a.roll == 0.0
            assert np.allclose(ypr_to_rot(a), q.rotation_matrix(), atol=1e-7)


def test_ypr_to_quat_matches_rot():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        y, p, r = rng.uniform(-math.pi, math.pi, 3)
        p *= 0.499
        a = YprAngles(y, p, r)
        assert np.allclose(ypr_to_quat(a).rotation_matrix(), ypr_to_rot(a), atol=1e-12)


def test_pose_compose_identity_and_inverse():
    rng = np.random.default_rng(8)
    ident = Pose.identity()
    for _ in range(500):
        b = Pose(rng.normal(size=3), UnitQuaternion(*rng.normal(size=4)))
        c = pose_compose(ident, b)
        assert np.allclose(c.position, b.position, atol=1e-15)
        assert np.allclose(c.orientation.as_array(), b.orientation.as_array(), atol=1e-15)
        bi = pose_compose(b, pose_inverse(b))
        assert np.allclose(bi.position, np.zeros(3), atol=1e-9)
        assert np.allclose(bi.orientation.as_array(), [1, 0, 0, 0], atol=1e-9)
    inv_id = pose_inverse(ident)
    assert np.allclose(inv_id.position, np.zeros(3), atol=1e-15)


def test_pose_compose_matches_homogeneous_matrices():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        a = Pose(rng.normal(size=3), UnitQuaternion(*rng.normal(size=4)))
        b = Pose(rng.normal(size=3), UnitQuaternion(*rng.normal(size=4)))
        c = pose_compose(a, b)
        assert np.allclose(c.matrix(), a.matrix() @ b.matrix(), atol=1e-12)
        r = pose_relative(a, b)
        assert np.allclose(r.matrix(), np.linalg.inv(a.matrix()) @ b.matrix(), atol=1e-9)


def test_pose_compose_associative():
    rng = np.random.default_rng(10)
    for _ in range(500):
        a, b, c = (
            Pose(rng.normal(size=3), UnitQuaternion(*rng.normal(size=4))) for _ in range(3)
        )
        lhs = pose_compose(pose_compose(a, b), c)
        rhs = pose_compose(a, pose_compose(b, c))
        assert np.allclose(lhs.position, rhs.position, atol=1e-9)
        assert np.allclose(lhs.orientation.as_array(), rhs.orientation.as_array(), atol=1e-9)


def test_pose_transform_points():
    rng = np.random.default_rng(11)
    a = Pose(rng.normal(size=3), UnitQuaternion(*rng.normal(size=4)))
    pts = rng.normal(size=(50, 3))
    hom = np.c_[pts, np.ones(50)] @ a.matrix().T
    assert np.allclose(a.transform(pts), hom[:, :3], atol=1e-12)
    assert np.allclose(a.transform(pts[0]), hom[0, :3], atol=1e-12)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert abs(wrap_angle(math.pi) - math.pi) < 1e-15
    assert abs(wrap_angle(-math.pi) - math.pi) < 1e-15  # half-open at -pi
    assert abs(wrap_angle(3 * math.pi) - math.pi) < 1e-12
    rng = np.random.default_rng(12)
    xs = rng.uniform(-50, 50, 5000)
    ws = wrap_angle(xs)
    assert np.all(ws > -math.pi) and np.all(ws <= math.pi)
    # wrapped value differs from input by an exact multiple of 2*pi
    k = (xs - ws) / (2 * math.pi)
    assert np.allclose(k, np.round(k), atol=1e-9)


def test_so3_exp_matches_rotvec_oracle():
    rng = np.random.default_rng(50)
    for _ in range(500):
        w = rng.normal(0.0, 1.2, 3)
        want = Rotation.from_rotvec(w).as_matrix()
        assert np.allclose(so3_exp(w), want, atol=1e-13)
    for s in (0.0, 1e-12, 1e-9, 1e-7):
        w = np.array([s, -s / 2.0, s / 3.0])
        want = Rotation.from_rotvec(w).as_matrix()
        assert np.allclose(so3_exp(w), want, atol=1e-15)


def test_so3_log_roundtrip_including_half_turns():
    rng = np.random.default_rng(51)
    for _ in range(500):
        R = Rotation.random(random_state=rng).as_matrix()
        w = so3_log(R)
        assert np.linalg.norm(w) <= math.pi + 1e-12
        assert np.allclose(so3_exp(w), R, atol=1e-12)
    for _ in range(100):
        ax = rng.normal(0.0, 1.0, 3)
        ax /= np.linalg.norm(ax)
        for eps in (0.0, 1e-9, 1e-5):
            R = Rotation.from_rotvec(ax * (math.pi - eps)).as_matrix()
            assert np.allclose(so3_exp(so3_log(R)), R, atol=1e-12)
