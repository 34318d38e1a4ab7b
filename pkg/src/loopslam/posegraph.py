"""4-DOF global pose graph: sequential + loop edges over keyframe vertices,
robust optimization of (x, y, z, yaw) with frozen roll/pitch, map merging,
graph downsampling, and a checksummed binary map format.

Roll and pitch are observable from odometry and drift-free, so each vertex
stores them as constants fixed at insertion time; optimization touches only
position and yaw, and recomposes the vertex quaternion from
(yaw_new, pitch, roll) afterwards.

Edge measurements always difference the raw odometry poses captured when a
vertex was added (`base_pose`), never the evolving estimates, so repeated
optimization cannot rewrite the measurement history.
"""

import math
import struct
import zlib

import numpy as np

from loopslam.geom import (
    Pose,
    UnitQuaternion,
    YprAngles,
    quat_to_ypr,
    wrap_angle,
    ypr_to_quat,
    ypr_to_rot,
)

MAGIC = b"VPG1"
FORMAT_VERSION = 1
NO_FIXED_ID = 0xFFFFFFFFFFFFFFFF

_HEADER = struct.Struct("<4sHIQI")
_FEATURE_DTYPE = np.dtype([("u", "<f4"), ("v", "<f4"), ("d", "u1", 32)])


class MapFormatError(ValueError):
    """Base class for map file deserialization failures."""


class BadMagicError(MapFormatError):
    pass


class VersionError(MapFormatError):
    pass


class TruncatedMapError(MapFormatError):
    pass


class ChecksumError(MapFormatError):
    pass


class Vertex:
    """Keyframe vertex: optimizable (p, yaw), frozen (pitch, roll).

    `uv` and `descriptors` are kept only so a saved map can re-detect loops
    after loading; the optimizer never reads them.
    """

    __slots__ = ("id", "seq", "p", "yaw", "pitch", "roll", "q", "base_pose", "uv", "descriptors")

    def __init__(self, vid, pose, seq=0, uv=None, descriptors=None):
        ypr = quat_to_ypr(pose.q)
        self.id = int(vid)
        self.seq = int(seq)
        self.p = np.array(pose.p, dtype=np.float64).reshape(3)
        self.yaw = ypr.yaw
        self.pitch = ypr.pitch
        self.roll = ypr.roll
        self.q = pose.q
        self.base_pose = pose
        if uv is None:
            self.uv = np.zeros((0, 2), dtype=np.float32)
        else:
            self.uv = np.asarray(uv, dtype=np.float32).reshape(-1, 2)
        if descriptors is None:
            self.descriptors = np.zeros((0, 32), dtype=np.uint8)
        else:
            self.descriptors = np.asarray(descriptors, dtype=np.uint8).reshape(-1, 32)
        if len(self.uv) != len(self.descriptors):
            raise ValueError("feature count mismatch between uv and descriptors")

    def estimate(self):
        return Pose(self.p, self.q)

    def __repr__(self):
        return "Vertex(id=%d, seq=%d, p=%s, yaw=%.6g)" % (self.id, self.seq, self.p, self.yaw)


def vertex_from_keyframe(kf, seq=0):
    return Vertex(kf.frame_id, kf.pose, seq=seq, uv=kf.uv, descriptors=kf.descriptors)


class Edge:
    """Relative 4-DOF measurement from vertex i to vertex j.

    Sequential edges additionally carry the full relative rotation of the
    base poses (`rel_rot`) so downsampling can re-stitch measurement chains
    across removed vertices by exact composition.
    """

    __slots__ = ("i", "j", "p_rel", "yaw_rel", "is_loop", "rel_rot")

    def __init__(self, i, j, p_rel, yaw_rel, is_loop=False, rel_rot=None):
        if int(i) == int(j):
            raise ValueError("edge endpoints must differ")
        self.i = int(i)
        self.j = int(j)
        self.p_rel = np.array(p_rel, dtype=np.float64).reshape(3)
        self.yaw_rel = float(yaw_rel)
        self.is_loop = bool(is_loop)
        self.rel_rot = None if rel_rot is None else np.array(rel_rot, dtype=np.float64)


class OptReport:
    __slots__ = ("converged", "iterations", "initial_cost", "final_cost")

    def __init__(self, converged, iterations, initial_cost, final_cost):
        self.converged = converged
        self.iterations = iterations
        self.initial_cost = initial_cost
        self.final_cost = final_cost

    def __repr__(self):
        return "OptReport(converged=%s, iterations=%d, cost %.6g -> %.6g)" % (
            self.converged,
            self.iterations,
            self.initial_cost,
            self.final_cost,
        )


class PoseGraph:
    def __init__(self, seq_connect=4):
        if seq_connect < 1:
            raise ValueError("seq_connect must be >= 1")
        self.vertices = {}
        self.seq_edges = []
        self.loop_edges = []
        self.fixed_id = None
        self.counter = 0
        self.seq_connect = int(seq_connect)
        self._per_seq = {}

    def __len__(self):
        return len(self.vertices)


def _sequential_edge(u, v):
    """Relative measurement between the raw odometry poses of u and v."""
    Ri = u.base_pose.q.rotation_matrix()
    Rj = v.base_pose.q.rotation_matrix()
    p_rel = Ri.T @ (np.asarray(v.base_pose.p) - np.asarray(u.base_pose.p))
    yaw_rel = wrap_angle(quat_to_ypr(v.base_pose.q).yaw - quat_to_ypr(u.base_pose.q).yaw)
    return Edge(u.id, v.id, p_rel, yaw_rel, is_loop=False, rel_rot=Ri.T @ Rj)


def add_keyframe(g, v, odometry_pose):
    """Insert v, connecting it to up to seq_connect predecessors in its sequence."""
    if v.id in g.vertices:
        raise ValueError("duplicate vertex id %d" % v.id)
    v.base_pose = odometry_pose
    g.vertices[v.id] = v
    if g.fixed_id is None:
        g.fixed_id = v.id
    g.counter = max(g.counter, v.id + 1)
    chain = g._per_seq.setdefault(v.seq, [])
    for pid in chain[-g.seq_connect :]:
        g.seq_edges.append(_sequential_edge(g.vertices[pid], v))
    chain.append(v.id)
    return v.id


def add_loop_edge(g, e):
    if not e.is_loop:
        raise ValueError("add_loop_edge requires an edge with is_loop=True")
    for vid in (e.i, e.j):
        if vid not in g.vertices:
            raise ValueError("loop edge endpoint %d not in graph" % vid)
    g.loop_edges.append(e)


def residual_4dof(vi, vj, e):
    """4-vector [position residual in i's yaw-pitch-roll frame; wrapped yaw]."""
    Ri = ypr_to_rot(YprAngles(vi.yaw, vi.pitch, vi.roll))
    r = np.empty(4)
    r[:3] = Ri.T @ (vj.p - vi.p) - e.p_rel
    r[3] = wrap_angle(vj.yaw - vi.yaw - e.yaw_rel)
    return r


def jacobian_4dof(vi, vj, e):
    """Residual plus analytic 4x4 Jacobians w.r.t. (p_i, yaw_i) and (p_j, yaw_j)."""
    cy, sy = math.cos(vi.yaw), math.sin(vi.yaw)
    M = ypr_to_rot(YprAngles(0.0, vi.pitch, vi.roll))  # Ry(pitch) Rx(roll)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    dRz = np.array([[-sy, -cy, 0.0], [cy, -sy, 0.0], [0.0, 0.0, 0.0]])
    Ri = Rz @ M
    dRi = dRz @ M  # dR/dyaw_i
    dp = vj.p - vi.p
    r = np.empty(4)
    r[:3] = Ri.T @ dp - e.p_rel
    r[3] = wrap_angle(vj.yaw - vi.yaw - e.yaw_rel)
    Ji = np.zeros((4, 4))
    Ji[:3, :3] = -Ri.T
    Ji[:3, 3] = dRi.T @ dp
    Ji[3, 3] = -1.0
    Jj = np.zeros((4, 4))
    Jj[:3, :3] = Ri.T
    Jj[3, 3] = 1.0
    return r, Ji, Jj


def _huber(s, delta):
    return s * s if s <= delta else 2.0 * delta * s - delta * delta


def graph_cost(g, huber_delta=1.0):
    """Reference cost: squared sequential edges, Huber-robust loop edges."""
    total = 0.0
    for e in g.seq_edges:
        r = residual_4dof(g.vertices[e.i], g.vertices[e.j], e)
        total += float(r @ r)
    for e in g.loop_edges:
        r = residual_4dof(g.vertices[e.i], g.vertices[e.j], e)
        total += _huber(float(np.linalg.norm(r)), huber_delta)
    return total


def connected_components(g):
    adj = {vid: [] for vid in g.vertices}
    for e in list(g.seq_edges) + list(g.loop_edges):
        adj[e.i].append(e.j)
        adj[e.j].append(e.i)
    seen = set()
    comps = []
    for start in g.vertices:
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _rot_zyx_batch(yaw, pitch, roll):
    """Stack of Rz(yaw) @ Ry(pitch) @ Rx(roll) matrices, shape (..., 3, 3)."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    R = np.empty(np.shape(yaw) + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def _drot_dyaw_batch(yaw, pitch, roll):
    """d/dyaw of the stacked rotations above."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    M = _rot_zyx_batch(np.zeros_like(yaw), pitch, roll)
    D = np.empty_like(M)
    D[..., 0, :] = -sy[..., None] * M[..., 0, :] - cy[..., None] * M[..., 1, :]
    D[..., 1, :] = cy[..., None] * M[..., 0, :] - sy[..., None] * M[..., 1, :]
    D[..., 2, :] = 0.0
    return D


class _BatchProblem:
    """Vectorized residual/normal-equation assembly over all edges."""

    def __init__(self, g, huber_delta):
        self.order = list(g.vertices)
        idx = {vid: k for k, vid in enumerate(self.order)}
        n = len(self.order)
        self.n = n
        self.P0 = np.array([g.vertices[v].p for v in self.order])
        self.Y0 = np.array([g.vertices[v].yaw for v in self.order])
        self.TH = np.array([g.vertices[v].pitch for v in self.order])
        self.PH = np.array([g.vertices[v].roll for v in self.order])
        edges = list(g.seq_edges) + list(g.loop_edges)
        self.ei = np.array([idx[e.i] for e in edges], dtype=np.int64)
        self.ej = np.array([idx[e.j] for e in edges], dtype=np.int64)
        self.EP = np.array([e.p_rel for e in edges]).reshape(len(edges), 3)
        self.EY = np.array([e.yaw_rel for e in edges])
        self.LOOP = np.array([e.is_loop for e in edges], dtype=bool)
        self.delta = huber_delta
        self.cols = 4 * np.arange(n)[:, None] + np.arange(4)[None, :]

    def residuals(self, P, Y):
        R = _rot_zyx_batch(Y, self.TH, self.PH)
        dp = P[self.ej] - P[self.ei]
        rp = np.einsum("eji,ej->ei", R[self.ei], dp) - self.EP
        ry = wrap_angle(Y[self.ej] - Y[self.ei] - self.EY)
        return np.concatenate([rp, ry[:, None]], axis=1)

    def cost(self, P, Y):
        r = self.residuals(P, Y)
        s2 = np.sum(r * r, axis=1)
        seq_part = float(np.sum(s2[~self.LOOP]))
        s = np.sqrt(s2[self.LOOP])
        d = self.delta
        rho = np.where(s <= d, s * s, 2.0 * d * s - d * d)
        return seq_part + float(np.sum(rho))

    def normal_equations(self, P, Y):
        """Dense H = J^T W J and g = J^T W r with IRLS Huber weights on loops."""
        E = len(self.ei)
        R = _rot_zyx_batch(Y, self.TH, self.PH)
        D = _drot_dyaw_batch(Y, self.TH, self.PH)
        Ri = R[self.ei]
        dp = P[self.ej] - P[self.ei]
        rp = np.einsum("eji,ej->ei", Ri, dp) - self.EP
        ry = wrap_angle(Y[self.ej] - Y[self.ei] - self.EY)
        r = np.concatenate([rp, ry[:, None]], axis=1)
        RiT = np.transpose(Ri, (0, 2, 1))
        Ji = np.zeros((E, 4, 4))
        Jj = np.zeros((E, 4, 4))
        Ji[:, :3, :3] = -RiT
        Ji[:, :3, 3] = np.einsum("eji,ej->ei", D[self.ei], dp)
        Ji[:, 3, 3] = -1.0
        Jj[:, :3, :3] = RiT
        Jj[:, 3, 3] = 1.0
        w = np.ones(E)
        s = np.sqrt(np.maximum(np.sum(r[self.LOOP] ** 2, axis=1), 1e-300))
        w[self.LOOP] = np.minimum(1.0, self.delta / s)
        H = np.zeros((4 * self.n, 4 * self.n))
        gvec = np.zeros(4 * self.n)
        wi = w[:, None, None]
        JiT = np.transpose(Ji, (0, 2, 1))
        JjT = np.transpose(Jj, (0, 2, 1))
        Hij = wi * (JiT @ Jj)
        ci = self.cols[self.ei]
        cj = self.cols[self.ej]
        np.add.at(H, (ci[:, :, None], ci[:, None, :]), wi * (JiT @ Ji))
        np.add.at(H, (ci[:, :, None], cj[:, None, :]), Hij)
        np.add.at(H, (cj[:, :, None], ci[:, None, :]), np.transpose(Hij, (0, 2, 1)))
        np.add.at(H, (cj[:, :, None], cj[:, None, :]), wi * (JjT @ Jj))
        np.add.at(gvec, ci, w[:, None] * np.einsum("eji,ej->ei", Ji, r))
        np.add.at(gvec, cj, w[:, None] * np.einsum("eji,ej->ei", Jj, r))
        return H, gvec


def optimize(g, cfg=None, cost_tol=1e-8, grad_tol=1e-10):
    """Levenberg-Marquardt over (p, yaw) of every non-fixed vertex."""
    huber_delta = cfg.huber_delta if cfg is not None else 1.0
    max_iters = cfg.pg_max_iters if cfg is not None else 100
    if not g.vertices:
        return OptReport(True, 0, 0.0, 0.0)
    comps = connected_components(g)
    if len(comps) > 1:
        raise ValueError("pose graph is disconnected; components: %s" % (comps,))
    prob = _BatchProblem(g, huber_delta)
    idx = {vid: k for k, vid in enumerate(prob.order)}
    free = np.ones(prob.n, dtype=bool)
    free[idx[g.fixed_id]] = False
    free_cols = prob.cols[free].ravel()
    P, Y = prob.P0.copy(), prob.Y0.copy()
    cost = prob.cost(P, Y)
    initial_cost = cost
    lam = None
    nu = 2.0
    converged = len(free_cols) == 0
    it = 0
    while not converged and it < max_iters:
        it += 1
        H, gvec = prob.normal_equations(P, Y)
        gf = gvec[free_cols]
        if np.max(np.abs(gf)) < grad_tol:
            converged = True
            it -= 1
            break
        Hf = H[np.ix_(free_cols, free_cols)]
        if lam is None:
            lam = 1e-6 * np.trace(Hf) / len(free_cols)
            if not lam > 0:
                lam = 1e-6
        accepted = False
        while not accepted:
            try:
                delta = np.linalg.solve(Hf + lam * np.eye(len(free_cols)), -gf)
            except np.linalg.LinAlgError:
                delta = None
            if delta is None:
                new_cost = np.inf
            else:
                dfull = np.zeros(4 * prob.n)
                dfull[free_cols] = delta
                d4 = dfull.reshape(prob.n, 4)
                Pn = P + d4[:, :3]
                Yn = wrap_angle(Y + d4[:, 3])
                new_cost = prob.cost(Pn, Yn)
            if new_cost < cost:
                pred = float(delta @ (lam * delta - gf))
                rho = (cost - new_cost) / max(pred, 1e-300)
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                P, Y, cost = Pn, Yn, new_cost
                accepted = True
                if rel_drop < cost_tol:
                    converged = True
            else:
                lam *= nu
                nu *= 2.0
                if lam > 1e12:
                    converged = True  # flat; nothing left to gain
                    break
        if converged:
            break
    for k, vid in enumerate(prob.order):
        v = g.vertices[vid]
        if vid != g.fixed_id:
            v.p = P[k].copy()
            v.yaw = float(Y[k])
        v.q = ypr_to_quat(YprAngles(v.yaw, v.pitch, v.roll))
    return OptReport(converged, it, initial_cost, cost)


def merge(g, other):
    """Absorb `other` into g with remapped ids; returns old id -> new id."""
    old_ids = list(other.vertices)
    base = g.counter
    mapping = {vid: base + k for k, vid in enumerate(sorted(old_ids))}
    seq_base = max((v.seq for v in g.vertices.values()), default=-1) + 1
    per_seq_src = [(s, list(chain)) for s, chain in other._per_seq.items()]
    seq_edges_src = list(other.seq_edges)
    loop_edges_src = list(other.loop_edges)
    other_fixed = other.fixed_id
    for old_id in old_ids:
        src = other.vertices[old_id]
        v = Vertex(
            mapping[old_id],
            src.base_pose,
            seq=src.seq + seq_base,
            uv=src.uv.copy(),
            descriptors=src.descriptors.copy(),
        )
        v.p = src.p.copy()
        v.yaw = src.yaw
        v.pitch = src.pitch
        v.roll = src.roll
        v.q = src.q
        g.vertices[v.id] = v
        g.counter = max(g.counter, v.id + 1)
    for s, chain in per_seq_src:
        g._per_seq[s + seq_base] = [mapping[vid] for vid in chain]
    for e in seq_edges_src:
        g.seq_edges.append(Edge(mapping[e.i], mapping[e.j], e.p_rel, e.yaw_rel, False, e.rel_rot))
    for e in loop_edges_src:
        g.loop_edges.append(Edge(mapping[e.i], mapping[e.j], e.p_rel, e.yaw_rel, True, e.rel_rot))
    if g.fixed_id is None and other_fixed is not None:
        g.fixed_id = mapping[other_fixed]
    return mapping


def downsample(g, dist_thresh, yaw_thresh):
    """Drop redundant vertices; re-stitch sequential chains by composition.

    Scanning in id order, a vertex is removed iff it touches no loop edge,
    is not the fixed vertex, and sits closer than dist_thresh or turns less
    than yaw_thresh relative to the previous kept vertex of its sequence.
    """
    if dist_thresh < 0 or yaw_thresh < 0:
        raise ValueError("thresholds must be non-negative")
    protected = {g.fixed_id}
    for e in g.loop_edges:
        protected.add(e.i)
        protected.add(e.j)
    removed = []
    prev_kept = {}
    for vid in sorted(g.vertices):
        v = g.vertices[vid]
        pk = prev_kept.get(v.seq)
        if vid in protected or pk is None:
            prev_kept[v.seq] = v
            continue
        close = float(np.linalg.norm(v.p - pk.p)) < dist_thresh
        similar = abs(wrap_angle(v.yaw - pk.yaw)) < yaw_thresh
        if close or similar:
            removed.append(vid)
        else:
            prev_kept[v.seq] = v
    if not removed:
        return []
    rm = set(removed)
    step = {(e.i, e.j): e for e in g.seq_edges}
    new_edges = [e for e in g.seq_edges if e.i not in rm and e.j not in rm]
    for s, chain in g._per_seq.items():
        pos = {vid: k for k, vid in enumerate(chain)}
        kept_chain = [vid for vid in chain if vid not in rm]
        for a, b in zip(kept_chain[:-1], kept_chain[1:]):
            if (a, b) in step:
                continue
            seg = chain[pos[a] : pos[b] + 1]
            p = np.zeros(3)
            R = np.eye(3)
            yaw = 0.0
            parts = [step.get((u, w)) for u, w in zip(seg[:-1], seg[1:])]
            if any(e is None for e in parts):
                continue
            for e in parts:
                p = p + R @ e.p_rel
                yaw += e.yaw_rel
                R = R @ e.rel_rot
            new_edges.append(Edge(a, b, p, wrap_angle(yaw), False, R))
        g._per_seq[s] = kept_chain
    g.seq_edges = new_edges
    for vid in removed:
        del g.vertices[vid]
    return removed


def save(g, path):
    """Write the map: header + per-keyframe records, CRC32 over the records."""
    first_loop = {}
    for e in g.loop_edges:
        first_loop.setdefault(e.i, e)
    payload = bytearray()
    for v in g.vertices.values():
        payload += struct.pack("<Q", v.id)
        payload += v.p.tobytes()
        payload += struct.pack("<dddd", v.q.w, v.q.x, v.q.y, v.q.z)
        payload += struct.pack("<I", v.seq)
        e = first_loop.get(v.id)
        if e is not None:
            payload += struct.pack("<BQ", 1, e.j)
            payload += e.p_rel.tobytes()
            payload += struct.pack("<d", e.yaw_rel)
        else:
            payload += struct.pack("<B", 0)
        count = len(v.uv)
        payload += struct.pack("<H", count)
        if count:
            feats = np.zeros(count, dtype=_FEATURE_DTYPE)
            feats["u"] = v.uv[:, 0]
            feats["v"] = v.uv[:, 1]
            feats["d"] = v.descriptors
            payload += feats.tobytes()
    fixed = NO_FIXED_ID if g.fixed_id is None else g.fixed_id
    crc = zlib.crc32(bytes(payload)) & 0xFFFFFFFF
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, len(g.vertices), fixed, crc)
    with open(path, "wb") as f:
        f.write(header)
        f.write(bytes(payload))


def load(path, seq_connect=4):
    """Rebuild a graph from a map file.

    Stored poses become the new odometry baseline: sequential edges are
    recomputed from them exactly as add_keyframe would, and stored loop
    edges are re-attached verbatim.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise TruncatedMapError("file shorter than magic")
    if data[:4] != MAGIC:
        raise BadMagicError("bad magic %r" % data[:4])
    if len(data) < _HEADER.size:
        raise TruncatedMapError("file shorter than header")
    _, version, count, fixed, crc = _HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise VersionError("unsupported map version %d" % version)
    payload = data[_HEADER.size :]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumError("payload CRC mismatch")
    g = PoseGraph(seq_connect=seq_connect)
    off = 0
    loops = []

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(payload):
            raise TruncatedMapError("record data ends mid-field")
        vals = struct.unpack_from(fmt, payload, off)
        off += size
        return vals

    for _ in range(count):
        (vid,) = take("<Q")
        p = np.array(take("<ddd"))
        w, x, y, z = take("<dddd")
        (seq,) = take("<I")
        (has_loop,) = take("<B")
        if has_loop:
            (target,) = take("<Q")
            p_rel = np.array(take("<ddd"))
            (yaw_rel,) = take("<d")
            loops.append((vid, target, p_rel, yaw_rel))
        (nfeat,) = take("<H")
        fsize = nfeat * _FEATURE_DTYPE.itemsize
        if off + fsize > len(payload):
            raise TruncatedMapError("feature block ends mid-record")
        feats = np.frombuffer(payload, dtype=_FEATURE_DTYPE, count=nfeat, offset=off)
        off += fsize
        uv = np.stack([feats["u"], feats["v"]], axis=1) if nfeat else None
        desc = feats["d"].copy() if nfeat else None
        q = UnitQuaternion.from_normalized(w, x, y, z)
        pose = Pose(p, q)
        add_keyframe(g, Vertex(vid, pose, seq=seq, uv=uv, descriptors=desc), pose)
    if off != len(payload):
        raise TruncatedMapError("trailing bytes after %d records" % count)
    for vid, target, p_rel, yaw_rel in loops:
        add_loop_edge(g, Edge(vid, target, p_rel, yaw_rel, is_loop=True))
    if fixed == NO_FIXED_ID:
        g.fixed_id = None
    else:
        if fixed not in g.vertices:
            raise MapFormatError("fixed vertex %d not among records" % fixed)
        g.fixed_id = fixed
    return g


class Correction:
    """4-DOF rigid correction: p -> Rz(yaw) p + t, heading -> heading + yaw."""

    __slots__ = ("yaw", "t")

    def __init__(self, yaw, t):
        self.yaw = float(yaw)
        self.t = np.array(t, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls):
        return cls(0.0, np.zeros(3))


def correction_between(old_pose, new_pose):
    """Correction carrying old_pose onto new_pose (yaw + translation only)."""
    dyaw = wrap_angle(quat_to_ypr(new_pose.q).yaw - quat_to_ypr(old_pose.q).yaw)
    Rz = ypr_to_rot(YprAngles(dyaw, 0.0, 0.0))
    t = np.asarray(new_pose.p, dtype=np.float64) - Rz @ np.asarray(old_pose.p, dtype=np.float64)
    return Correction(dyaw, t)


def propagate_correction(g, anchor_id, corr):
    """Move every vertex inserted after anchor_id by the given correction.

    Keeps relative measurements intact (edges difference base poses, which
    are untouched); used to reconcile keyframes added while an optimization
    ran on an older snapshot of the graph.
    """
    if anchor_id not in g.vertices:
        raise ValueError("anchor %d not in graph" % anchor_id)
    Rz = ypr_to_rot(YprAngles(corr.yaw, 0.0, 0.0))
    moved = []
    after = False
    for vid, v in g.vertices.items():
        if after:
            v.p = Rz @ v.p + corr.t
            v.yaw = wrap_angle(v.yaw + corr.yaw)
            v.q = ypr_to_quat(YprAngles(v.yaw, v.pitch, v.roll))
            moved.append(vid)
        if vid == anchor_id:
            after = True
    return moved
