"""Suite-wide guard: pose-graph optimization must never touch the frozen
pitch/roll of any vertex, and stored quaternions must stay exact
recompositions of (yaw, frozen pitch, frozen roll). Wraps every
posegraph.optimize call in the whole test session.
"""

import struct

import numpy as np
import pytest

import loopslam.posegraph as pg
from loopslam.geom import YprAngles, ypr_to_quat

GUARD_STATS = {"optimize_calls": 0}


@pytest.fixture(autouse=True, scope="session")
def freeze_pitch_roll_guard():
    real = pg.optimize

    def guarded(g, cfg=None, **kw):
        before = {
            vid: struct.pack("<dd", v.pitch, v.roll) for vid, v in g.vertices.items()
        }
        out = real(g, cfg, **kw)
        GUARD_STATS["optimize_calls"] += 1
        for vid, v in g.vertices.items():
            if struct.pack("<dd", v.pitch, v.roll) != before[vid]:
                raise AssertionError(
                    "optimize modified frozen pitch/roll of vertex %d" % vid
                )
            q = ypr_to_quat(YprAngles(v.yaw, v.pitch, v.roll))
            if (v.q.w, v.q.x, v.q.y, v.q.z) != (q.w, q.x, q.y, q.z):
                raise AssertionError(
                    "vertex %d quaternion is not the yaw-only recomposition" % vid
                )
        return out

    pg.optimize = guarded
    yield
    pg.optimize = real
