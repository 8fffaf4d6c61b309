"""Waypoints, procedural track generation, obstacle placement anchored to the
track, crossing detection, and the versioned track file format.

A waypoint is a finite rectangle: its x-axis is the valid pass direction and
y/z run parallel to the rectangle sides. Consecutive waypoint poses are built
from a 5-parameter relative pose (azimuth, elevation, distance, roll,
exit-pitch).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import OrbitParams, RandomizationBounds, TreeParams
from .geom import (
    OrientedBox,
    boxes_overlap,
    euler_zyx_to_matrix,
    matrix_to_quat,
    point_to_box_distance,
    point_to_segment_distance,
    quat_to_matrix,
    rot_x,
    rot_y,
    rot_z,
    segment_to_box_distance,
)

TRACK_FORMAT = "gaterace-track"
TRACK_VERSION = 1


class TrackGenerationError(RuntimeError):
    """Raised when a track cannot be fitted into the environment bounds."""


def make_rng(*key) -> np.random.Generator:
    """Seedable, platform-stable PCG64 stream for a hashable integer key.

    Per-env substreams use make_rng(global_seed, env_index, rollout_index) so
    results do not depend on batch size or stepping order.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


@dataclass
class Waypoint:
    position: np.ndarray
    quaternion: np.ndarray      # scalar-first, world<-waypoint
    width: float                # m, pass region along waypoint y
    height: float               # m, pass region along waypoint z
    bars: bool = False          # physical frame present

    def rotation(self):
        return quat_to_matrix(self.quaternion)

    def corners(self):
        """4x3 world corners, fixed order (+y+z, -y+z, -y-z, +y-z)."""
        hw, hh = 0.5 * self.width, 0.5 * self.height
        local = np.array([[0, hw, hh], [0, -hw, hh], [0, -hw, -hh], [0, hw, -hh]], dtype=float)
        return self.position + local @ self.rotation().T


@dataclass
class RelPoseParams:
    psi: float    # rad, azimuth of the displacement
    theta: float  # rad, elevation
    r: float      # m, center distance
    alpha: float  # rad, roll of the next waypoint
    gamma: float  # rad, extra pitch of the next waypoint

    def as_tuple(self):
        return (self.psi, self.theta, self.r, self.alpha, self.gamma)


@dataclass
class TrackSpec:
    waypoints: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.waypoints)

    def centers(self):
        return np.array([wp.position for wp in self.waypoints])


@dataclass
class Obstacle:
    """Analytic primitive; dims are (sx,sy,sz) for cuboids, (radius, height)
    for cylinders (axis along local z) and (radius,) for spheres.

    Composite obstacles (trees) share one `group` label across their parts.
    """
    kind: str
    position: np.ndarray
    quaternion: np.ndarray
    dims: tuple
    group: str = ""

    def rotation(self):
        return quat_to_matrix(self.quaternion)

    def as_box(self) -> OrientedBox:
        if self.kind != "cuboid":
            raise ValueError("as_box only applies to cuboids")
        return OrientedBox(self.position, self.rotation(), 0.5 * np.asarray(self.dims))

    def bounding_radius(self) -> float:
        if self.kind == "cuboid":
            return 0.5 * float(np.linalg.norm(self.dims))
        if self.kind == "cylinder":
            return math.hypot(self.dims[0], 0.5 * self.dims[1])
        return float(self.dims[0])


@dataclass
class ObstacleSet:
    obstacles: list = field(default_factory=list)

    def __len__(self):
        return len(self.obstacles)

    def __iter__(self):
        return iter(self.obstacles)

    def group_count(self) -> int:
        """Number of managed obstacles, counting a composite as one."""
        return len({o.group or id(o) for o in self.obstacles})

    def group_kinds(self) -> dict:
        counts = {}
        for g in {o.group or id(o) for o in self.obstacles}:
            label = str(g).rstrip("0123456789-") or "primitive"
            counts[label] = counts.get(label, 0) + 1
        return counts


class Crossing(enum.Enum):
    NONE = "none"
    PASSED = "passed"
    WRONG_SIDE_HIT = "wrong_side_hit"


# ---------------------------------------------------------------------------
# waypoint chaining

def next_waypoint_pose(p_i, R_i, params: RelPoseParams):
    """Pose of the next waypoint from the previous pose and relative parameters."""
    psi, theta, r, alpha, gamma = params.as_tuple()
    heading = rot_y(theta) @ rot_z(psi) @ R_i
    p_j = r * (heading @ np.array([1.0, 0.0, 0.0])) + np.asarray(p_i, dtype=float)
    R_j = rot_y(gamma) @ rot_x(alpha) @ heading
    return p_j, R_j


def fit_to_bounds(track: TrackSpec, env_bounds) -> TrackSpec:
    """Translate the whole track rigidly so every rectangle corner is inside.

    Tracks already inside are returned unchanged; an oversized track raises
    TrackGenerationError.
    """
    lo = np.asarray(env_bounds[0], dtype=float)
    hi = np.asarray(env_bounds[1], dtype=float)
    pts = np.vstack([wp.corners() for wp in track.waypoints] + [track.centers()])
    bb_lo, bb_hi = pts.min(axis=0), pts.max(axis=0)
    if np.any(bb_hi - bb_lo > hi - lo):
        raise TrackGenerationError("track bounding box exceeds environment bounds")
    offset = np.maximum(lo - bb_lo, 0.0) + np.minimum(hi - bb_hi, 0.0)
    if np.all(offset == 0.0):
        return track
    moved = [Waypoint(wp.position + offset, wp.quaternion.copy(), wp.width, wp.height, wp.bars)
             for wp in track.waypoints]
    return TrackSpec(moved, dict(track.metadata))


def generate_track(bounds: RandomizationBounds, n: int, rng: np.random.Generator,
                   metadata=None, retries: int = 10) -> TrackSpec:
    """Procedural track: random first waypoint attitude, chained relative poses,
    uniform pass-region sizes, then a rigid shift into the environment bounds."""
    if n < 3:
        raise ValueError("tracks need at least 3 waypoints")
    lo = np.asarray(bounds.rel_pose_lo)
    hi = np.asarray(bounds.rel_pose_hi)
    last_err = None
    for _ in range(retries):
        b = bounds.init_wp_rpy_bounds
        roll, pitch = rng.uniform(-b, b, size=2)
        yaw = rng.uniform(-math.pi, math.pi)
        R = euler_zyx_to_matrix(roll, pitch, yaw)
        p = np.zeros(3)
        poses = [(p, R)]
        for _j in range(n - 1):
            params = RelPoseParams(*rng.uniform(lo, hi))
            p, R = next_waypoint_pose(*poses[-1], params)
            poses.append((p, R))
        wps = []
        for p, R in poses:
            w, h = rng.uniform(*bounds.wp_size_range, size=2)
            g = bool(rng.random() < bounds.bar_probability)
            wps.append(Waypoint(p, matrix_to_quat(R), float(w), float(h), g))
        spec = TrackSpec(wps, dict(metadata or {}))
        try:
            return fit_to_bounds(spec, bounds.env_bounds)
        except TrackGenerationError as err:
            last_err = err
    raise TrackGenerationError(f"no fitting track after {retries} attempts: {last_err}")


# ---------------------------------------------------------------------------
# obstacle placement

def pass_region_box(wp: Waypoint, margin: float) -> OrientedBox:
    """The pass rectangle extruded +-margin along the waypoint axis."""
    return OrientedBox(np.asarray(wp.position, dtype=float), wp.rotation(),
                       np.array([margin, 0.5 * wp.width, 0.5 * wp.height]))


def obstacle_overlaps_box(obs: Obstacle, box: OrientedBox) -> bool:
    if obs.kind == "cuboid":
        return boxes_overlap(obs.as_box(), box)
    if obs.kind == "sphere":
        return point_to_box_distance(obs.position, box) <= obs.dims[0]
    axis = obs.rotation()[:, 2]
    a = obs.position - 0.5 * obs.dims[1] * axis
    b = obs.position + 0.5 * obs.dims[1] * axis
    return segment_to_box_distance(a, b, box) <= obs.dims[0]


def obstacle_overlaps_capsule(obs: Obstacle, seg_a, seg_b, radius: float) -> bool:
    """Conservative check against a keep-out capsule (used for the spawn zone)."""
    pad = obs.bounding_radius()
    return point_to_segment_distance(obs.position, seg_a, seg_b) <= radius + pad


def _is_clear(obs: Obstacle, keepout_boxes, keepout_capsules):
    for box in keepout_boxes:
        if obstacle_overlaps_box(obs, box):
            return False
    for a, b, r in keepout_capsules:
        if obstacle_overlaps_capsule(obs, a, b, r):
            return False
    return True


def _facing_rotation(direction):
    """Rotation whose x-axis points along `direction`, z kept as vertical as possible."""
    x = np.asarray(direction, dtype=float)
    x = x / np.linalg.norm(x)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(x @ up)) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    y = np.cross(up, x)
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def _lateral_jitter(rng, direction, radius):
    """Uniform offset in the disc perpendicular to `direction`."""
    R = _facing_rotation(direction)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    rad = radius * math.sqrt(rng.uniform(0.0, 1.0))
    return rad * (math.cos(ang) * R[:, 1] + math.sin(ang) * R[:, 2])


def place_wall_obstacles(track: TrackSpec, n: int, size_lo, size_hi,
                         rng: np.random.Generator, *, jitter: float = 1.0,
                         margin: float = 0.5, keep_out=(), max_tries: int = 50):
    """Thin cuboids on the segments between consecutive waypoint centers,
    oriented to face the segment; unplaceable walls are dropped."""
    centers = track.centers()
    n_seg = len(centers) - 1
    keep_boxes = [pass_region_box(wp, margin) for wp in track.waypoints]
    walls = []
    for _ in range(n):
        for _try in range(max_tries):
            seg = int(rng.integers(0, n_seg))
            a, b = centers[seg], centers[seg + 1]
            t = rng.uniform(0.1, 0.9)
            base = a + t * (b - a)
            offset = _lateral_jitter(rng, b - a, jitter)
            size = rng.uniform(size_lo, size_hi)
            obs = Obstacle("cuboid", base + offset,
                           matrix_to_quat(_facing_rotation(b - a)), tuple(size),
                           group=f"wall-{len(walls)}")
            if _is_clear(obs, keep_boxes, keep_out):
                walls.append(obs)
                break
    return walls


def _polyline_point(centers, dists, s):
    """Point at arc length s along the waypoint-center polyline."""
    for i, d in enumerate(dists):
        if s <= d or i == len(dists) - 1:
            t = s / d if d > 0 else 0.0
            return centers[i] + t * (centers[i + 1] - centers[i]), centers[i + 1] - centers[i]
        s -= d
    raise AssertionError("unreachable")


def make_tree(anchor, direction, params: TreeParams, rng: np.random.Generator,
              group: str = "tree"):
    """Trunk centered on the local path altitude plus a few tilted branches."""
    trunk_r = rng.uniform(*params.trunk_radius_range)
    trunk_h = rng.uniform(*params.trunk_height_range)
    parts = [Obstacle("cylinder", np.asarray(anchor, dtype=float),
                      np.array([1.0, 0.0, 0.0, 0.0]), (float(trunk_r), float(trunk_h)),
                      group=group)]
    n_branch = int(rng.integers(params.branch_count_range[0], params.branch_count_range[1] + 1))
    for _ in range(n_branch):
        azim = rng.uniform(0.0, 2.0 * math.pi)
        tilt = rng.uniform(math.pi / 8, math.pi / 3)
        attach = rng.uniform(0.0, 0.5 * trunk_h)
        length = params.branch_length_scale * trunk_h * rng.uniform(0.5, 1.0)
        radius = params.branch_radius_scale * trunk_r * rng.uniform(0.7, 1.0)
        R = rot_z(azim) @ rot_y(tilt)
        root = parts[0].position + np.array([0.0, 0.0, attach])
        center = root + 0.5 * length * R[:, 2]
        parts.append(Obstacle("cylinder", center, matrix_to_quat(R),
                              (float(radius), float(length)), group=group))
    return parts


def place_tree_obstacles(track: TrackSpec, n: int, params: TreeParams,
                         rng: np.random.Generator, *, jitter: float = 1.0,
                         margin: float = 0.5, keep_out=(), max_tries: int = 50):
    """Tree-like cylinder compositions uniform (by arc length) along the polyline."""
    centers = track.centers()
    dists = [float(np.linalg.norm(centers[i + 1] - centers[i])) for i in range(len(centers) - 1)]
    total = sum(dists)
    keep_boxes = [pass_region_box(wp, margin) for wp in track.waypoints]
    trees = []
    placed = 0
    for _ in range(n):
        for _try in range(max_tries):
            s = rng.uniform(0.0, total)
            point, direction = _polyline_point(centers, dists, s)
            offset = _lateral_jitter(rng, direction, jitter)
            parts = make_tree(point + offset, direction, params, rng,
                              group=f"tree-{placed}")
            if all(_is_clear(p, keep_boxes, keep_out) for p in parts):
                trees.extend(parts)
                placed += 1
                break
    return trees


def _random_quat(rng):
    v = rng.normal(size=4)
    return v / np.linalg.norm(v)


def place_orbit_obstacles(track: TrackSpec, n: int, params: OrbitParams,
                          rng: np.random.Generator, *, margin: float = 0.5,
                          keep_out=(), max_tries: int = 50):
    """Mixed-shape obstacles on rings around the configured waypoints,
    distributed round-robin and placed in each waypoint's plane."""
    targets = [track.waypoints[i] for i in params.waypoints if i < len(track.waypoints)]
    if not targets:
        return []
    keep_boxes = [pass_region_box(wp, margin) for wp in track.waypoints]
    kinds = ("cuboid", "cylinder", "sphere")
    placed = []
    for i in range(n):
        wp = targets[i % len(targets)]
        R = wp.rotation()
        for _try in range(max_tries):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            ring = rng.uniform(*params.radius_range)
            pos = wp.position + ring * (math.cos(ang) * R[:, 1] + math.sin(ang) * R[:, 2])
            kind = kinds[int(rng.integers(0, 3))]
            s = rng.uniform(*params.size_range)
            if kind == "cuboid":
                dims = tuple(rng.uniform(*params.size_range, size=3))
                quat = _random_quat(rng)
            elif kind == "cylinder":
                dims = (0.5 * s, 1.5 * s)
                quat = _random_quat(rng)
            else:
                dims = (0.5 * s,)
                quat = np.array([1.0, 0.0, 0.0, 0.0])
            obs = Obstacle(kind, pos, quat, dims, group=f"orbit-{len(placed)}")
            if _is_clear(obs, keep_boxes, keep_out):
                placed.append(obs)
                break
    return placed


def gate_bars(wp: Waypoint, thickness: float = 0.1):
    """Four cuboids framing the pass rectangle; empty when the flag is off."""
    if not wp.bars:
        return []
    t = thickness
    w, h = wp.width, wp.height
    R = wp.rotation()
    q = wp.quaternion.copy()
    local = [
        (np.array([0.0, (w + t) / 2, 0.0]), (t, t, h + 2 * t)),
        (np.array([0.0, -(w + t) / 2, 0.0]), (t, t, h + 2 * t)),
        (np.array([0.0, 0.0, (h + t) / 2]), (t, w, t)),
        (np.array([0.0, 0.0, -(h + t) / 2]), (t, w, t)),
    ]
    return [Obstacle("cuboid", wp.position + R @ off, q, dims, group="bars")
            for off, dims in local]


def waypoint_crossing(p_prev, p_cur, wp: Waypoint) -> Crossing:
    """Classify the motion segment against the waypoint rectangle.

    PASSED requires crossing the plane along the waypoint +x direction through
    the rectangle; the reverse direction is WRONG_SIDE_HIT. Plane crossings
    outside the rectangle are NONE (bars are the collision checker's job).
    """
    R = wp.rotation()
    a = R.T @ (np.asarray(p_prev, dtype=float) - wp.position)
    b = R.T @ (np.asarray(p_cur, dtype=float) - wp.position)
    if a[0] <= 0.0 and b[0] > 0.0:
        direction = Crossing.PASSED
    elif a[0] > 0.0 and b[0] <= 0.0:
        direction = Crossing.WRONG_SIDE_HIT
    else:
        return Crossing.NONE
    t = a[0] / (a[0] - b[0])
    hit = a + t * (b - a)
    if abs(hit[1]) <= 0.5 * wp.width and abs(hit[2]) <= 0.5 * wp.height:
        return direction
    return Crossing.NONE


def straight_track(n: int, spacing: float, width: float = 2.0, height: float = 2.0,
                   bars: bool = False, origin=(0.0, 0.0, 0.0)) -> TrackSpec:
    """Axis-aligned track along +x; handy for evaluation and smoke tests."""
    wps = []
    for i in range(n):
        p = np.asarray(origin, dtype=float) + np.array([i * spacing, 0.0, 0.0])
        wps.append(Waypoint(p, np.array([1.0, 0.0, 0.0, 0.0]), width, height, bars))
    return TrackSpec(wps, {"kind": "straight", "spacing": spacing})


# ---------------------------------------------------------------------------
# track files

def save_track(path, track: TrackSpec, obstacles: ObstacleSet):
    doc = {
        "format": TRACK_FORMAT,
        "version": TRACK_VERSION,
        "metadata": track.metadata,
        "waypoints": [
            {
                "position": list(map(float, wp.position)),
                "quaternion": list(map(float, wp.quaternion)),
                "width": wp.width,
                "height": wp.height,
                "bars": wp.bars,
            }
            for wp in track.waypoints
        ],
        "obstacles": [
            {
                "kind": o.kind,
                "position": list(map(float, o.position)),
                "quaternion": list(map(float, o.quaternion)),
                "dims": list(map(float, o.dims)),
                "group": o.group,
            }
            for o in obstacles
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_track(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != TRACK_FORMAT:
        raise ValueError(f"{path}: not a {TRACK_FORMAT} file")
    if doc.get("version") != TRACK_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    wps = [
        Waypoint(np.array(w["position"]), np.array(w["quaternion"]),
                 float(w["width"]), float(w["height"]), bool(w["bars"]))
        for w in doc["waypoints"]
    ]
    obs = [
        Obstacle(o["kind"], np.array(o["position"]), np.array(o["quaternion"]),
                 tuple(o["dims"]), o.get("group", ""))
        for o in doc["obstacles"]
    ]
    return TrackSpec(wps, doc.get("metadata", {})), ObstacleSet(obs)
