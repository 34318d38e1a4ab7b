"""Command-line driver: simulation, vocabulary training, the full
detect-verify-relocalize-optimize pipeline, map management, and trajectory
evaluation. Every subcommand prints key=value lines so runs are easy to
diff and script against.
"""

import argparse
import copy
import os
import sys
import time

import numpy as np

from . import posegraph as pg
from .camera import Keyframe
from .config import PipelineConfig, read_kv
from .evaluate import associate, ate, read_tum, rigid_align, write_tum
from .reloc import (
    LoopAttachment,
    build_window_problem,
    compute_loop_edge,
    optimize_window,
    window_from_keyframes,
)
from .retrieval import (
    BowDatabase,
    build_vocabulary,
    db_add,
    pick_loop_candidate,
    save_vocabulary,
    transform,
)
from .sim import SimConfig, generate_world, make_keyframes, simulate_odometry
from .verify import verify_loop


def load_configs(path, seed=None):
    """One key=value file feeds both configs; unknown keys are errors."""
    kv = read_kv(path) if path else {}
    known = set(SimConfig.FIELDS) | set(PipelineConfig.FIELDS)
    unknown = sorted(set(kv) - known)
    if unknown:
        raise ValueError("unknown config keys: %s" % ", ".join(unknown))
    if seed is not None:
        kv["seed"] = str(int(seed))
    return SimConfig.from_dict(kv), PipelineConfig.from_dict(kv)


def _candidate_from_vertex(v):
    # A stored vertex carries everything verification needs from the
    # candidate side: pixel observations and descriptors. 3D points always
    # come from the query, so zeros are never read.
    n = len(v.uv)
    return Keyframe(
        frame_id=v.id,
        timestamp=float(v.id),
        pose=v.estimate(),
        uv=v.uv.astype(np.float64),
        points3d=np.zeros((n, 3)),
        descriptors=v.descriptors,
        landmark_ids=None,
    )


def graph_trajectory(g):
    """(times, positions, poses) over vertices in id order; time = id."""
    ids = sorted(g.vertices)
    times = np.array([float(i) for i in ids])
    if ids:
        pos = np.stack([g.vertices[i].p for i in ids])
    else:
        pos = np.zeros((0, 3))
    poses = [g.vertices[i].estimate() for i in ids]
    return times, pos, poses


def per_frame_errors(est, gt, max_dt=0.01):
    """Aligned per-frame position errors as (timestamp, error) rows."""
    et, ep = est
    gtt, gp = gt
    pairs = associate(et, gtt, max_dt)
    if len(pairs) < 2:
        raise ValueError("no timestamp overlap between trajectories")
    P = np.asarray(ep)[[i for i, _ in pairs]]
    Q = np.asarray(gp)[[j for _, j in pairs]]
    R, t = rigid_align(P, Q)
    res = np.linalg.norm(P @ R.T + t - Q, axis=1)
    return [(float(et[i]), float(res[k])) for k, (i, _) in enumerate(pairs)]


def _reconcile(g, pending, pipe_cfg):
    """Fold an optimized snapshot back into the live graph.

    Snapshot-era vertices adopt the optimized estimates; vertices added
    while the snapshot was being optimized ride the anchor's correction.
    """
    snap = pending["snap"]
    anchor = pending["anchor"]
    pg.optimize(snap, pipe_cfg)
    corr = pg.correction_between(
        g.vertices[anchor].estimate(), snap.vertices[anchor].estimate()
    )
    pg.propagate_correction(g, anchor, corr)
    for vid, sv in snap.vertices.items():
        lv = g.vertices[vid]
        lv.p = sv.p.copy()
        lv.yaw = sv.yaw
        lv.q = sv.q


def run_pipeline(sim_cfg, pipe_cfg, mode="idhash", map_path=None, gt_path=None, concurrent=False):
    """Simulate, ingest every keyframe through retrieval -> verification ->
    window relocalization -> loop edge, then optimize the pose graph once.

    Returns (report dict, graph, artifacts dict). With map_path the stored
    session is loaded first, optimized once immediately, and the new
    sequence is appended under a fresh sequence id; cross-sequence loop
    edges then stitch the two sessions.
    """
    timings = {}
    t_total = time.perf_counter()

    loaded_ids = []
    if map_path:
        g = pg.load(map_path, seq_connect=pipe_cfg.seq_connect)
        loaded_ids = sorted(g.vertices)
        pg.optimize(g, pipe_cfg)  # settle the stored session before appending
    else:
        g = pg.PoseGraph(seq_connect=pipe_cfg.seq_connect)
    id_offset = (max(loaded_ids) + 1) if loaded_ids else 0
    seq = (max(g.vertices[i].seq for i in loaded_ids) + 1) if loaded_ids else 0

    t0 = time.perf_counter()
    world = generate_world(sim_cfg)
    track = simulate_odometry(world, sim_cfg)
    kfs = make_keyframes(world, track, sim_cfg, mode=mode, id_offset=id_offset)
    timings["sim"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    training = [g.vertices[i].descriptors for i in loaded_ids]
    training += [kf.descriptors for kf in kfs]
    training = [b for b in training if len(b)]
    vocab = build_vocabulary(
        training, k=pipe_cfg.vocab_k, depth=pipe_cfg.vocab_depth, seed=pipe_cfg.seed
    )
    db = BowDatabase(vocab)
    frames_by_id = {}
    for vid in loaded_ids:
        v = g.vertices[vid]
        db_add(db, vid, transform(v.descriptors, vocab))
        frames_by_id[vid] = _candidate_from_vertex(v)
    timings["vocab"] = time.perf_counter() - t0

    intr = sim_cfg.intrinsics()
    attempted = accepted = reconciles = 0
    t_retr = t_ver = t_rel = 0.0
    window_buf = []
    pending = None

    for kf in kfs:
        vtx = pg.vertex_from_keyframe(kf, seq=seq)
        pg.add_keyframe(g, vtx, kf.pose)
        frames_by_id[kf.frame_id] = kf
        window_buf.append(kf)

        t0 = time.perf_counter()
        vec = transform(kf.descriptors, vocab)
        cand = pick_loop_candidate(
            db,
            vec,
            min_score=pipe_cfg.min_bow_score,
            rel_factor=pipe_cfg.rel_score_factor,
            exclude_last=pipe_cfg.exclude_last,
        )
        db_add(db, kf.frame_id, vec)
        t_retr += time.perf_counter() - t0

        if cand is not None and len(window_buf) >= 2:
            attempted += 1
            fid = cand[0]
            t0 = time.perf_counter()
            ver = verify_loop(kf, frames_by_id[fid], intr, pipe_cfg)
            t_ver += time.perf_counter() - t0
            if ver.accepted:
                t0 = time.perf_counter()
                win = window_buf[-pipe_cfg.window_size :]
                window = window_from_keyframes(
                    win, sigma_p=pipe_cfg.odom_sigma_p, sigma_theta=pipe_cfg.odom_sigma_theta
                )
                qi = np.array([m.index_query for m in ver.inliers])
                ci = np.array([m.index_candidate for m in ver.inliers])
                att = LoopAttachment(
                    fid,
                    g.vertices[fid].estimate(),
                    kf.landmark_ids[qi],
                    frames_by_id[fid].uv[ci],
                )
                prob = build_window_problem(window, att, intr, huber_delta=pipe_cfg.huber_delta)
                upd, _rep = optimize_window(prob, max_iters=pipe_cfg.reloc_max_iters)
                res = compute_loop_edge(
                    kf.frame_id, upd.poses[-1], fid, att.pose, inlier_count=len(ver.inliers)
                )
                pg.add_loop_edge(
                    g, pg.Edge(res.frame_i, res.frame_v, res.p_rel, res.yaw_rel, is_loop=True)
                )
                accepted += 1
                t_rel += time.perf_counter() - t0
                if concurrent and pending is None:
                    pending = {"snap": copy.deepcopy(g), "anchor": kf.frame_id, "left": 3}

        if pending is not None:
            pending["left"] -= 1
            if pending["left"] <= 0:
                _reconcile(g, pending, pipe_cfg)
                reconciles += 1
                pending = None

    if pending is not None:
        _reconcile(g, pending, pipe_cfg)
        reconciles += 1
        pending = None

    pre_times, pre_pos, pre_poses = graph_trajectory(g)

    t0 = time.perf_counter()
    opt_rep = pg.optimize(g, pipe_cfg)
    timings["optimize"] = time.perf_counter() - t0
    post_times, post_pos, post_poses = graph_trajectory(g)

    gt_times = np.array([kf.timestamp for kf in kfs])
    gt_pos = np.stack([p.p for p in world.poses])
    gt_live_poses = list(world.poses)
    if gt_path:
        ts, ps, _ = read_tum(gt_path)
        gt_times = np.concatenate([ts, gt_times])
        gt_pos = np.vstack([ps, gt_pos])

    pre_rep = ate((pre_times, pre_pos), (gt_times, gt_pos))
    post_rep = ate((post_times, post_pos), (gt_times, gt_pos))

    nv_before = len(g.vertices)
    removed = pg.downsample(g, pipe_cfg.downsample_dist, pipe_cfg.downsample_yaw)

    timings["retrieval"] = t_retr
    timings["verify"] = t_ver
    timings["reloc"] = t_rel
    timings["total"] = time.perf_counter() - t_total

    report = {
        "mode": mode,
        "keyframes": len(kfs),
        "loaded_vertices": len(loaded_ids),
        "loop_attempted": attempted,
        "loop_accepted": accepted,
        "loop_edges": len(g.loop_edges),
        "graph_vertices": nv_before,
        "graph_vertices_after_downsample": len(g.vertices),
        "removed_by_downsample": len(removed),
        "optimize_converged": int(opt_rep.converged),
        "optimize_iterations": opt_rep.iterations,
        "concurrent_reconciles": reconciles,
    }
    for k, v in pre_rep.as_dict().items():
        report["pre_" + k] = v
    for k, v in post_rep.as_dict().items():
        report["post_" + k] = v
    for k, v in timings.items():
        report["timing_%s_ms" % k] = v * 1000.0

    artifacts = {
        "graph": g,
        "world": world,
        "track": track,
        "keyframes": kfs,
        "vocab": vocab,
        "pre": (pre_times, pre_pos, pre_poses),
        "post": (post_times, post_pos, post_poses),
        "gt": (gt_times, gt_pos),
        "gt_live_poses": gt_live_poses,
        "pre_report": pre_rep,
        "post_report": post_rep,
        "opt_report": opt_rep,
    }
    return report, g, artifacts


def _print_report(report, path=None):
    lines = []
    for k in sorted(report):
        v = report[k]
        if isinstance(v, float):
            lines.append("%s=%.9g" % (k, v))
        else:
            lines.append("%s=%s" % (k, v))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as f:
            f.write(text)
    sys.stdout.write(text)


def _write_errors_csv(path, rows):
    with open(path, "w") as f:
        f.write("timestamp,error_m\n")
        for t, e in rows:
            f.write("%.9g,%.9g\n" % (t, e))


def cmd_simulate(args):
    sim_cfg, _ = load_configs(args.config, args.seed)
    world = generate_world(sim_cfg)
    track = simulate_odometry(world, sim_cfg)
    os.makedirs(args.out, exist_ok=True)
    times = np.arange(len(world), dtype=np.float64)
    write_tum(os.path.join(args.out, "gt.tum"), times, world.poses)
    write_tum(os.path.join(args.out, "odom.tum"), times, track.poses)
    drift = ate(
        (times, np.stack([p.p for p in track.poses])),
        (times, np.stack([p.p for p in world.poses])),
        align=False,
    )
    _print_report(
        {
            "keyframes": len(world),
            "landmarks": len(world.landmarks),
            "odom_drift_rmse": drift.rmse,
            "out": args.out,
        }
    )
    return 0


def cmd_build_vocab(args):
    sim_cfg, pipe_cfg = load_configs(args.config, args.seed)
    world = generate_world(sim_cfg)
    track = simulate_odometry(world, sim_cfg)
    kfs = make_keyframes(world, track, sim_cfg, mode=args.mode)
    training = [kf.descriptors for kf in kfs if len(kf.descriptors)]
    vocab = build_vocabulary(
        training, k=pipe_cfg.vocab_k, depth=pipe_cfg.vocab_depth, seed=pipe_cfg.seed
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "vocab.vbw")
    save_vocabulary(vocab, path)
    _print_report(
        {
            "images": len(training),
            "descriptors": int(sum(len(t) for t in training)),
            "words": vocab.word_count,
            "vocab": path,
        }
    )
    return 0


def cmd_run(args):
    sim_cfg, pipe_cfg = load_configs(args.config, args.seed)
    report, g, art = run_pipeline(
        sim_cfg,
        pipe_cfg,
        mode=args.mode,
        map_path=args.map,
        gt_path=args.gt,
        concurrent=args.concurrent,
    )
    report_path = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        kfs = art["keyframes"]
        live_times = np.array([kf.timestamp for kf in kfs])
        write_tum(os.path.join(args.out, "gt.tum"), live_times, art["gt_live_poses"])
        pre_t, _, pre_poses = art["pre"]
        post_t, post_pos, post_poses = art["post"]
        write_tum(os.path.join(args.out, "pre.tum"), pre_t, pre_poses)
        write_tum(os.path.join(args.out, "post.tum"), post_t, post_poses)
        rows = per_frame_errors((post_t, post_pos), art["gt"])
        _write_errors_csv(os.path.join(args.out, "errors.csv"), rows)
        pg.save(g, os.path.join(args.out, "map.vpg"))
        report_path = os.path.join(args.out, "report.txt")
    _print_report(report, report_path)
    return 0


def cmd_merge(args):
    a = pg.load(args.maps[0])
    b = pg.load(args.maps[1])
    mapping = pg.merge(a, b)
    pg.save(a, args.out)
    _print_report(
        {
            "vertices": len(a.vertices),
            "remapped": len(mapping),
            "loop_edges": len(a.loop_edges),
            "components": len(pg.connected_components(a)),
            "out": args.out,
        }
    )
    return 0


def cmd_downsample(args):
    _, pipe_cfg = load_configs(args.config, args.seed)
    g = pg.load(args.map)
    before = len(g.vertices)
    removed = pg.downsample(g, pipe_cfg.downsample_dist, pipe_cfg.downsample_yaw)
    pg.save(g, args.out)
    _print_report(
        {
            "vertices_before": before,
            "vertices_after": len(g.vertices),
            "removed": len(removed),
            "out": args.out,
        }
    )
    return 0


def cmd_save_map(args):
    g = pg.load(args.map)
    pg.save(g, args.out)
    _print_report({"vertices": len(g.vertices), "bytes": os.path.getsize(args.out), "out": args.out})
    return 0


def cmd_load_map(args):
    g = pg.load(args.map)
    seqs = sorted({v.seq for v in g.vertices.values()})
    _print_report(
        {
            "vertices": len(g.vertices),
            "seq_edges": len(g.seq_edges),
            "loop_edges": len(g.loop_edges),
            "sequences": len(seqs),
            "fixed_id": g.fixed_id if g.fixed_id is not None else -1,
            "features": int(sum(len(v.uv) for v in g.vertices.values())),
        }
    )
    return 0


def cmd_eval(args):
    et, epos, _ = read_tum(args.est)
    gtt, gpos, _ = read_tum(args.gt)
    rep = ate((et, epos), (gtt, gpos))
    if args.out:
        rows = per_frame_errors((et, epos), (gtt, gpos))
        _write_errors_csv(args.out, rows)
    _print_report(rep.as_dict())
    return 0


def cmd_report(args):
    report_path = os.path.join(args.out, "report.txt")
    have_report = os.path.exists(report_path)
    if have_report:
        sys.stdout.write(open(report_path).read())
    recomputed = {}
    gt_path = os.path.join(args.out, "gt.tum")
    for name in ("pre", "post"):
        est_path = os.path.join(args.out, "%s.tum" % name)
        if os.path.exists(est_path) and os.path.exists(gt_path):
            et, epos, _ = read_tum(est_path)
            gtt, gpos, _ = read_tum(gt_path)
            rep = ate((et, epos), (gtt, gpos))
            recomputed["recomputed_%s_ate_rmse" % name] = rep.rmse
    if recomputed:
        _print_report(recomputed)
    if not have_report and not recomputed:
        raise FileNotFoundError("no run artifacts under %s" % args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="loopslam",
        description="Loop closure back end: simulate, run, and evaluate.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mode=False):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if mode:
            p.add_argument("--mode", choices=("idhash", "rendered"), default="idhash")

    p = sub.add_parser("simulate", help="write ground truth + odometry trajectories")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-vocab", help="train and save a descriptor vocabulary")
    common(p, mode=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("run", help="full pipeline: detect, verify, relocalize, optimize")
    common(p, mode=True)
    p.add_argument("--out", default=None, help="artifact directory")
    p.add_argument("--map", default=None, help="load this map before the run")
    p.add_argument("--gt", default=None, help="extra ground-truth .tum for loaded frames")
    p.add_argument("--concurrent", action="store_true", help="staged snapshot optimization")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("merge", help="union two maps into one")
    p.add_argument("maps", nargs=2, help="two .vpg files")
    p.add_argument("--out", required=True, help="merged .vpg path")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("downsample", help="thin a map by spatial density")
    common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("save-map", help="round-trip a map file")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_save_map)

    p = sub.add_parser("load-map", help="print a map summary")
    p.add_argument("--map", required=True)
    p.set_defaults(func=cmd_load_map)

    p = sub.add_parser("eval", help="ATE between two .tum trajectories")
    p.add_argument("est", help="estimated trajectory (.tum)")
    p.add_argument("--gt", required=True, help="ground truth (.tum)")
    p.add_argument("--out", default=None, help="per-frame error csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="reprint and recompute run artifacts")
    p.add_argument("--out", required=True, help="run artifact directory")
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # uniform CLI error contract
        sys.stderr.write("error: %s\n" % e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
