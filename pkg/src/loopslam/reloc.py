"""Tightly-coupled window relocalization against a fixed loop frame.

The window cost couples three residual families: 6-DOF relative-odometry
factors between consecutive frames, local reprojection of the window's own
landmarks, and reprojection of retrieved correspondences onto the loop
frame whose pose is constant. Landmarks are parameterized as constants in
the frame that first observes them, so the local terms constrain only the
window's internal geometry and the loop terms are free to carry the whole
window onto the loop frame's world. All window poses stay free; the loop
frame supplies the gauge.
"""

import math

import numpy as np

from .geom import (
    Pose,
    UnitQuaternion,
    quat_to_ypr,
    so3_exp,
    so3_hat,
    so3_log,
    wrap_angle,
)


class WindowState:
    """Sliding window snapshot handed to the relocalizer.

    odometry_factors[k] constrains frames k and k+1 as (relative Pose
    measurement, 6x6 information). observations[k] is (landmark_ids, uv)
    for frame k. landmarks maps id -> world point (held fixed; never an
    optimization variable).
    """

    def __init__(self, frame_ids, poses, odometry_factors, observations, landmarks):
        if len(frame_ids) < 2:
            raise ValueError("window needs at least 2 frames")
        if len(poses) != len(frame_ids) or len(observations) != len(frame_ids):
            raise ValueError("per-frame lists disagree in length")
        if len(odometry_factors) != len(frame_ids) - 1:
            raise ValueError("odometry factors must connect consecutive frames only")
        for ids, uv in observations:
            for l in ids:
                if int(l) not in landmarks:
                    raise ValueError("observation references unknown landmark %d" % l)
        self.frame_ids = list(frame_ids)
        self.poses = list(poses)
        self.odometry_factors = list(odometry_factors)
        self.observations = observations
        self.landmarks = landmarks

    def __len__(self):
        return len(self.frame_ids)


class LoopAttachment:
    """Loop frame v: constant pose plus retrieved (landmark id, pixel) set."""

    def __init__(self, frame_id, pose, landmark_ids, uv):
        self.frame_id = frame_id
        self.pose = pose
        self.landmark_ids = np.asarray(landmark_ids, dtype=np.int64)
        self.uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        if len(self.landmark_ids) != len(self.uv):
            raise ValueError("landmark ids and observations disagree in length")


class LoopEdgeResult:
    """4-DOF loop edge emitted after relocalization."""

    def __init__(self, frame_i, frame_v, p_rel, yaw_rel, inlier_count):
        self.frame_i = frame_i
        self.frame_v = frame_v
        self.p_rel = np.asarray(p_rel, dtype=np.float64)
        self.yaw_rel = float(yaw_rel)
        self.inlier_count = int(inlier_count)


class RelocReport:
    def __init__(self, converged, iterations, initial_cost, final_cost):
        self.converged = converged
        self.iterations = iterations
        self.initial_cost = initial_cost
        self.final_cost = final_cost


def _jr_inv(theta):
    """Inverse right Jacobian of SO(3) at rotation vector theta."""
    t = float(np.linalg.norm(theta))
    K = so3_hat(theta)
    if t < 1e-6:
        return np.eye(3) + 0.5 * K + (1.0 / 12.0) * (K @ K)
    c = 1.0 / (t * t) - (1.0 + math.cos(t)) / (2.0 * t * math.sin(t))
    return np.eye(3) + 0.5 * K + c * (K @ K)


class RelocProblem:
    """Linearizable window problem with the loop frame folded in as data."""

    def __init__(
        self,
        frame_ids,
        p_init,
        R_init,
        odom,
        anchor_idx,
        X_loc,
        local_obs,
        loop_obs,
        loop_pose,
        intrinsics,
        huber_delta,
        window,
        loop,
    ):
        self.frame_ids = frame_ids
        self.p_init = p_init
        self.R_init = R_init
        self.odom = odom  # (i, p_rel, R_rel, Lt) with Lt^T Lt = information
        self.anchor_idx = anchor_idx
        self.X_loc = X_loc
        self.local_obs = local_obs  # (frame_idx, lm_idx, uv) arrays
        self.loop_obs = loop_obs  # (lm_idx, uv) arrays
        self.loop_R = loop_pose.q.rotation_matrix()
        self.loop_p = loop_pose.p.copy()
        self.intrinsics = intrinsics
        self.huber_delta = float(huber_delta)
        self.window = window
        self.loop = loop

    @property
    def num_frames(self):
        return len(self.frame_ids)

    def _cam_point(self, p, R, cam_idx, lm_idx):
        a = self.anchor_idx[lm_idx]
        Xw = R[a] @ self.X_loc[lm_idx] + p[a]
        return R[cam_idx].T @ (Xw - p[cam_idx])

    def _project(self, Xc):
        K = self.intrinsics
        z = Xc[2]
        return np.array([K.fx * Xc[0] / z + K.cx, K.fy * Xc[1] / z + K.cy])

    def vision_residuals(self, p, R):
        """Raw 2-vector reprojection residuals: local then loop."""
        out_local = np.zeros((len(self.local_obs[0]), 2))
        for n, (ci, li) in enumerate(zip(self.local_obs[0], self.local_obs[1])):
            Xc = self._cam_point(p, R, ci, li)
            out_local[n] = self._project(Xc) - self.local_obs[2][n]
        out_loop = np.zeros((len(self.loop_obs[0]), 2))
        for n, li in enumerate(self.loop_obs[0]):
            a = self.anchor_idx[li]
            Xw = R[a] @ self.X_loc[li] + p[a]
            Xc = self.loop_R.T @ (Xw - self.loop_p)
            out_loop[n] = self._project(Xc) - self.loop_obs[1][n]
        return out_local, out_loop

    def odom_residuals(self, p, R):
        """Information-weighted 6-vector residuals per factor."""
        out = np.zeros((len(self.odom), 6))
        for n, (i, p_rel, R_rel, Lt) in enumerate(self.odom):
            j = i + 1
            r = np.empty(6)
            r[:3] = R[i].T @ (p[j] - p[i]) - p_rel
            r[3:] = so3_log(R_rel.T @ R[i].T @ R[j])
            out[n] = Lt @ r
        return out

    def cost(self, p, R):
        ro = self.odom_residuals(p, R)
        rl, rv = self.vision_residuals(p, R)
        c = float(np.sum(ro * ro))
        d = self.huber_delta
        for r in (rl, rv):
            if len(r) == 0:
                continue
            s = np.linalg.norm(r, axis=1)
            quad = s <= d
            c += float(np.sum(s[quad] ** 2))
            c += float(np.sum(2.0 * d * s[~quad] - d * d))
        return c

    def linearize(self, p, R):
        """IRLS-weighted Jacobian and residual stack at the current point."""
        W = self.num_frames
        n_rows = 6 * len(self.odom) + 2 * (len(self.local_obs[0]) + len(self.loop_obs[0]))
        J = np.zeros((n_rows, 6 * W))
        r = np.zeros(n_rows)
        row = 0
        for i, p_rel, R_rel, Lt in self.odom:
            j = i + 1
            a = R[i].T @ (p[j] - p[i])
            rp = a - p_rel
            E = R_rel.T @ R[i].T @ R[j]
            rth = so3_log(E)
            Jb = np.zeros((6, 6 * W))
            Jb[:3, 6 * i : 6 * i + 3] = -R[i].T
            Jb[:3, 6 * j : 6 * j + 3] = R[i].T
            Jb[:3, 6 * i + 3 : 6 * i + 6] = so3_hat(a)
            Jri = _jr_inv(rth)
            Jb[3:, 6 * j + 3 : 6 * j + 6] = Jri
            Jb[3:, 6 * i + 3 : 6 * i + 6] = -Jri @ (R[j].T @ R[i])
            J[row : row + 6] = Lt @ Jb
            r[row : row + 6] = Lt @ np.concatenate([rp, rth])
            row += 6
        K = self.intrinsics
        d = self.huber_delta

        def vis_block(ci_R, ci_p, a, li, obs, cam_cols):
            # returns residual 2-vec and Jacobian rows against (p_a, th_a[, cam])
            Xw = R[a] @ self.X_loc[li] + p[a]
            Xc = ci_R.T @ (Xw - ci_p)
            z = Xc[2]
            pr = np.array([K.fx * Xc[0] / z + K.cx, K.fy * Xc[1] / z + K.cy])
            rv = pr - obs
            dpi = np.array(
                [
                    [K.fx / z, 0.0, -K.fx * Xc[0] / (z * z)],
                    [0.0, K.fy / z, -K.fy * Xc[1] / (z * z)],
                ]
            )
            blocks = {}
            dXc_dpa = ci_R.T
            dXc_dtha = -ci_R.T @ R[a] @ so3_hat(self.X_loc[li])
            blocks[6 * a] = dpi @ dXc_dpa
            blocks[6 * a + 3] = dpi @ dXc_dtha
            if cam_cols is not None:
                ci = cam_cols
                add_p = dpi @ (-ci_R.T)
                add_th = dpi @ so3_hat(Xc)
                blocks[6 * ci] = blocks.get(6 * ci, 0.0) + add_p
                blocks[6 * ci + 3] = blocks.get(6 * ci + 3, 0.0) + add_th
            return rv, blocks

        for n in range(len(self.local_obs[0])):
            ci = int(self.local_obs[0][n])
            li = int(self.local_obs[1][n])
            a = self.anchor_idx[li]
            rv, blocks = vis_block(
                R[ci], p[ci], a, li, self.local_obs[2][n], cam_cols=ci
            )
            s = float(np.linalg.norm(rv))
            w = 1.0 if s <= d else math.sqrt(d / s)
            for col, B in blocks.items():
                J[row : row + 2, col : col + 3] += w * B
            r[row : row + 2] = w * rv
            row += 2
        for n in range(len(self.loop_obs[0])):
            li = int(self.loop_obs[0][n])
            a = self.anchor_idx[li]
            rv, blocks = vis_block(
                self.loop_R, self.loop_p, a, li, self.loop_obs[1][n], cam_cols=None
            )
            s = float(np.linalg.norm(rv))
            w = 1.0 if s <= d else math.sqrt(d / s)
            for col, B in blocks.items():
                J[row : row + 2, col : col + 3] += w * B
            r[row : row + 2] = w * rv
            row += 2
        return J, r


def build_window_problem(window, loop, intrinsics, huber_delta=1.0):
    """Assemble the relocalization problem around the current window state.

    Landmark coordinates are rewritten into their first observing frame
    using the window's initial poses; from then on they ride rigidly with
    that frame's optimized pose.
    """
    if len(loop.landmark_ids) == 0:
        raise ValueError("loop attachment carries no retrieved features")
    W = len(window)
    p_init = np.stack([ps.p for ps in window.poses]).astype(np.float64)
    R_init = np.stack([ps.q.rotation_matrix() for ps in window.poses])

    lm_index = {}
    anchor = []
    X_loc_rows = []
    for k in range(W):
        ids, _ = window.observations[k]
        for l in ids:
            l = int(l)
            if l not in lm_index:
                lm_index[l] = len(anchor)
                anchor.append(k)
                Xw = np.asarray(window.landmarks[l], dtype=np.float64)
                X_loc_rows.append(R_init[k].T @ (Xw - p_init[k]))
    for l in loop.landmark_ids:
        if int(l) not in lm_index:
            raise ValueError("loop feature references landmark %d not in window" % l)

    frame_col = []
    lm_col = []
    uv_rows = []
    for k in range(W):
        ids, uv = window.observations[k]
        for n, l in enumerate(ids):
            frame_col.append(k)
            lm_col.append(lm_index[int(l)])
            uv_rows.append(uv[n])
    local_obs = (
        np.asarray(frame_col, dtype=np.int64),
        np.asarray(lm_col, dtype=np.int64),
        np.asarray(uv_rows, dtype=np.float64).reshape(-1, 2),
    )
    loop_obs = (
        np.asarray([lm_index[int(l)] for l in loop.landmark_ids], dtype=np.int64),
        loop.uv,
    )

    odom = []
    for k, (rel, info) in enumerate(window.odometry_factors):
        info = np.asarray(info, dtype=np.float64)
        L = np.linalg.cholesky(info)
        odom.append((k, rel.p.copy(), rel.q.rotation_matrix(), L.T))

    return RelocProblem(
        list(window.frame_ids),
        p_init,
        np.ascontiguousarray(R_init),
        odom,
        np.asarray(anchor, dtype=np.int64),
        np.asarray(X_loc_rows, dtype=np.float64).reshape(-1, 3),
        local_obs,
        loop_obs,
        loop.pose,
        intrinsics,
        huber_delta,
        window,
        loop,
    )


def optimize_window(problem, max_iters=50, cost_tol=1e-8, grad_tol=1e-10):
    """Levenberg-Marquardt over all window poses; loop pose untouched."""
    W = problem.num_frames
    p = problem.p_init.copy()
    R = problem.R_init.copy()
    cost = problem.cost(p, R)
    initial_cost = cost
    lam = None
    nu = 2.0
    # below this a pixel-scale residual sum is numerically zero
    converged = cost < 1e-14
    it = 0
    while not converged and it < max_iters:
        it += 1
        J, r = problem.linearize(p, R)
        g = J.T @ r
        if np.max(np.abs(g)) < grad_tol:
            converged = True
            it -= 1
            break
        H = J.T @ J
        if lam is None:
            lam = 1e-6 * np.trace(H) / (6.0 * W)
            if lam <= 0:
                lam = 1e-6
        accepted = False
        while not accepted:
            try:
                delta = np.linalg.solve(H + lam * np.eye(6 * W), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                p_new = p + delta.reshape(W, 6)[:, :3]
                R_new = np.stack(
                    [R[k] @ so3_exp(delta[6 * k + 3 : 6 * k + 6]) for k in range(W)]
                )
                new_cost = problem.cost(p_new, R_new)
            else:
                new_cost = np.inf
            if new_cost < cost:
                pred = float(delta @ (lam * delta - g)) if delta is not None else 1.0
                rho = (cost - new_cost) / max(pred, 1e-300)
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                p, R, cost = p_new, R_new, new_cost
                accepted = True
                if rel_drop < cost_tol or cost < 1e-14:
                    converged = True
            else:
                lam *= nu
                nu *= 2.0
                if lam > 1e12:
                    converged = True  # stuck at a flat point; treat as done
                    break
        if converged:
            break
    poses = [
        Pose(p[k].copy(), UnitQuaternion.from_rotation_matrix(R[k])) for k in range(W)
    ]
    updated = WindowState(
        problem.frame_ids,
        poses,
        problem.window.odometry_factors,
        problem.window.observations,
        problem.window.landmarks,
    )
    return updated, RelocReport(converged, it, initial_cost, cost)


def compute_loop_edge(frame_i, pose_i, frame_v, pose_v, inlier_count=0):
    """4-DOF relative transform of loop frame v in optimized frame i."""
    Ri = pose_i.q.rotation_matrix()
    p_rel = Ri.T @ (pose_v.p - pose_i.p)
    yaw_i = quat_to_ypr(pose_i.q).yaw
    yaw_v = quat_to_ypr(pose_v.q).yaw
    return LoopEdgeResult(
        frame_i, frame_v, p_rel, wrap_angle(yaw_v - yaw_i), inlier_count
    )


def window_from_keyframes(frames, sigma_p=0.01, sigma_theta=0.01):
    """Build a WindowState from consecutive keyframes.

    Odometry factors measure the relative pose between consecutive stored
    poses; landmark world points come from the first frame observing them.
    """
    from .geom import pose_relative

    info = np.diag(
        [1.0 / sigma_p**2] * 3 + [1.0 / sigma_theta**2] * 3
    )
    factors = [
        (pose_relative(frames[k].pose, frames[k + 1].pose), info)
        for k in range(len(frames) - 1)
    ]
    landmarks = {}
    observations = []
    for kf in frames:
        observations.append((kf.landmark_ids.copy(), kf.uv.copy()))
        for n, l in enumerate(kf.landmark_ids):
            l = int(l)
            if l not in landmarks:
                landmarks[l] = kf.points3d[n].copy()
    return WindowState(
        [kf.frame_id for kf in frames],
        [kf.pose for kf in frames],
        factors,
        observations,
        landmarks,
    )
