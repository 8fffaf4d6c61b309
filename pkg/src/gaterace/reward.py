"""The 8-term reward: dense shaping terms every step, sparse terms on events,
with a per-term breakdown kept for logging."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import GuidanceParams, RewardWeights, ShapingParams

TERM_NAMES = ("prog", "prec", "cmd", "col", "guid", "wp", "time", "vel")


@dataclass
class RewardBreakdown:
    prog: float = 0.0
    prec: float = 0.0
    cmd: float = 0.0
    col: float = 0.0
    guid: float = 0.0
    wp: float = 0.0
    time: float = 0.0
    vel: float = 0.0
    total: float = 0.0

    def terms(self):
        return np.array([self.prog, self.prec, self.cmd, self.col,
                         self.guid, self.wp, self.time, self.vel])

    def as_dict(self):
        d = {name: getattr(self, name) for name in TERM_NAMES}
        d["total"] = self.total
        return d


def guidance_reward(p_gate, w_wp: float, h_wp: float, gp: GuidanceParams) -> float:
    """Shaping field around a gate, evaluated at the drone position in the
    waypoint frame.

    Off-axis positions are penalized on the approach side (x <= 0) and on-axis
    positions on the exit side (x > 0), which punishes lining up with the gate
    from the wrong direction. The field vanishes beyond k0 along the axis.
    """
    x, y, z = float(p_gate[0]), float(p_gate[1]), float(p_gate[2])
    f = max(1.0 - abs(x) / gp.k0, 0.0)
    if f == 0.0:
        return 0.0
    f2 = f * f
    r2 = y * y + z * z
    k2 = gp.k2_front if x > 0.0 else gp.k2_back
    if r2 != 0.0:
        shape = math.sqrt(r2 / ((z / h_wp) ** 2 + (y / w_wp) ** 2))
        v = k2 * (1.0 + f2) * shape
    else:
        v = k2 * (1.0 + f2)
    inner = math.exp(-r2 / (2.0 * v))
    g = gp.k1 * inner if x > 0.0 else 1.0 - inner
    return -f2 * g


def progress_reward(dist_prev: float, dist_cur: float) -> float:
    """Potential difference of the distance to the target waypoint center."""
    return dist_prev - dist_cur


def perception_reward(camera_axis, dir_to_wp, c: float) -> float:
    """Penalty growing with the angle between the optical axis and the target
    direction: exp(c * angle^4) - 1 with c < 0."""
    cosang = float(np.clip(np.dot(camera_axis, dir_to_wp), -1.0, 1.0))
    delta = math.acos(cosang)
    return math.exp(c * delta ** 4) - 1.0


def command_reward(a_t, a_prev, omega_b, c1: float, c2: float) -> float:
    """Action-change and body-rate magnitude penalty."""
    da = np.asarray(a_t) - np.asarray(a_prev)
    return -c1 * float(da @ da) - c2 * float(np.linalg.norm(omega_b))


def velocity_reward(v_b, k3: float, k4: float) -> float:
    """Penalizes lateral and backward body-frame velocity (k3, k4 <= 0)."""
    vx, vy = float(v_b[0]), float(v_b[1])
    return k3 * vy * vy + k4 * min(vx, 0.0) ** 2


def total_reward(collided: bool, passed_wp: bool, timed_out: bool,
                 prog: float, prec: float, cmd: float, guid: float, vel: float,
                 weights: RewardWeights) -> RewardBreakdown:
    """Assemble the breakdown; sparse terms carry their configured post-weight
    magnitudes so logged columns match the weighted total."""
    br = RewardBreakdown(
        prog=prog, prec=prec, cmd=cmd, guid=guid, vel=vel,
        col=weights.collision_value if collided else 0.0,
        wp=weights.waypoint_value if passed_wp else 0.0,
        time=weights.timeout_value if timed_out else 0.0,
    )
    br.total = float(br.terms() @ weights.weights())
    return br


def shaping_terms(state_rotation, p_w, v_b, omega_b, a_t, a_prev, camera_axis,
                  target_wp, dist_prev, dist_cur,
                  gp: GuidanceParams, sp: ShapingParams):
    """All dense terms for one step (unweighted), as a dict."""
    p_gate = target_wp.rotation().T @ (np.asarray(p_w) - target_wp.position)
    to_wp = target_wp.position - np.asarray(p_w)
    n = np.linalg.norm(to_wp)
    if n > 0.0:
        prec = perception_reward(camera_axis, to_wp / n, sp.perception_c)
    else:
        prec = 0.0
    return {
        "prog": progress_reward(dist_prev, dist_cur),
        "prec": prec,
        "cmd": command_reward(a_t, a_prev, omega_b, sp.cmd_c1, sp.cmd_c2),
        "guid": guidance_reward(p_gate, target_wp.width, target_wp.height, gp),
        "vel": velocity_reward(v_b, sp.vel_k3, sp.vel_k4),
    }
