"""Pipeline configuration: flat key=value text files, strict key checking."""


def read_kv(path):
    """Parse a flat key=value file. Blank lines and # comments ignored."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key=value, got %r" % (path, lineno, line))
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


class PipelineConfig:
    """Back-end knobs. Defaults follow common practice; every value can be
    overridden from the same key=value file that configures the simulator."""

    FIELDS = {
        "max_hamming": (80, int),
        "epipolar_threshold_px": (1.0, float),
        "pnp_threshold_px": (3.0, float),
        "min_loop_inliers": (25, int),
        "ransac_iterations": (200, int),
        "ransac_confidence": (0.99, float),
        "min_bow_score": (0.015, float),
        "rel_score_factor": (0.5, float),
        "exclude_last": (30, int),
        "window_size": (10, int),
        "huber_delta": (1.0, float),
        "odom_sigma_p": (0.01, float),
        "odom_sigma_theta": (0.01, float),
        "reloc_max_iters": (50, int),
        "seq_connect": (4, int),
        "pg_max_iters": (100, int),
        "downsample_dist": (0.3, float),
        "downsample_yaw": (0.2, float),
        "vocab_k": (10, int),
        "vocab_depth": (4, int),
        "seed": (0, int),
    }

    def __init__(self, **kw):
        for name, (default, conv) in self.FIELDS.items():
            setattr(self, name, conv(kw.pop(name, default)))
        if kw:
            raise ValueError("unknown pipeline config keys: %s" % ", ".join(sorted(kw)))
        if self.min_loop_inliers < 4:
            raise ValueError("min_loop_inliers must be >= 4")
        if not 0.0 < self.ransac_confidence < 1.0:
            raise ValueError("ransac_confidence must be in (0, 1)")

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.FIELDS}
        return cls(**known)
