"""Observation construction: ray-cast depth images against analytic primitives,
the 18-dim state vector and the 34-dim two-waypoint vector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import CameraParams, ObsNormParams
from .dynamics import RigidBodyState
from .geom import ray_aabb_interior, ray_box, ray_cylinder, ray_sphere, rot_y
from .track import Obstacle, Waypoint

STATE_OBS_DIM = 18
WAYPOINT_OBS_DIM = 34


@dataclass
class DepthImage:
    """Normalized depth in [0,1], row-major with the top-left origin.
    Pixels with no hit inside the sensing range are exactly 1."""
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    def to_pgm(self, path):
        """16-bit portable graymap; far = bright."""
        img = np.round(self.values * 65535.0).astype(">u2")
        h, w = img.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n65535\n".encode())
            fh.write(img.tobytes())


@dataclass
class CameraPose:
    position: np.ndarray
    rot: np.ndarray  # camera->world; optical axis is column 0

    @property
    def optical_axis(self):
        return self.rot[:, 0]


def camera_pose(state: RigidBodyState, cam: CameraParams,
                mount=None, tilt=None) -> CameraPose:
    """World pose of the camera: body pose composed with the mount offset and
    an upward tilt about body y. Reset-time randomization passes overrides."""
    mount = np.asarray(cam.mount_position if mount is None else mount, dtype=float)
    tilt = cam.tilt_angle if tilt is None else tilt
    R_wb = state.rotation()
    return CameraPose(state.p_w + R_wb @ mount, R_wb @ rot_y(-tilt))


def pixel_rays(cam: CameraParams):
    """Unit ray directions in the camera frame, shape (H*W, 3).

    Camera frame: x along the optical axis, image u grows along -y (right),
    image v grows along -z (down). Square pixels; vfov follows from aspect.
    """
    tan_h = math.tan(0.5 * cam.hfov)
    tan_v = tan_h * cam.height / cam.width
    u = (2.0 * (np.arange(cam.width) + 0.5) / cam.width - 1.0) * tan_h
    v = (2.0 * (np.arange(cam.height) + 0.5) / cam.height - 1.0) * tan_v
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([np.ones_like(uu), -uu, -vv], axis=-1).reshape(-1, 3)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _cast_obstacle(origins, dirs, obs: Obstacle):
    if obs.kind == "cuboid":
        return ray_box(origins, dirs, obs.as_box())
    if obs.kind == "sphere":
        return ray_sphere(origins, dirs, obs.position, obs.dims[0])
    return ray_cylinder(origins, dirs, obs.position, obs.rotation(),
                        obs.dims[0], obs.dims[1])


def render_depth(pose: CameraPose, cam: CameraParams, obstacles,
                 env_bounds=None, rays=None) -> DepthImage:
    """Nearest positive ray hit per pixel, divided by d_max and clamped to 1.

    The environment bounds, when given, contribute six inward-facing walls.
    `rays` may carry precomputed camera-frame directions from pixel_rays().
    """
    if rays is None:
        rays = pixel_rays(cam)
    dirs = rays @ pose.rot.T
    origins = np.broadcast_to(pose.position, dirs.shape)
    best = np.full(len(dirs), np.inf)
    for obs in obstacles:
        best = np.minimum(best, _cast_obstacle(origins, dirs, obs))
    if env_bounds is not None:
        lo = np.asarray(env_bounds[0], dtype=float)
        hi = np.asarray(env_bounds[1], dtype=float)
        best = np.minimum(best, ray_aabb_interior(origins, dirs, lo, hi))
    depth = np.minimum(best / cam.d_max, 1.0)
    return DepthImage(depth.reshape(cam.height, cam.width))


def build_state_obs(state: RigidBodyState, p_w0, norm: ObsNormParams):
    """18-vector: scaled displacement from the start, the three body axes,
    scaled velocity and body rates; clamped to [-1, 1]."""
    R = state.rotation()
    out = np.concatenate([
        (state.p_w - np.asarray(p_w0)) / norm.p_max,
        R[:, 0], R[:, 1], R[:, 2],
        state.v_w / norm.v_max,
        state.omega_b / norm.omega_max,
    ])
    return np.clip(out, -1.0, 1.0)


def waypoint_block(p_drone, wp: Waypoint, l_max: float):
    """17 values for one waypoint: axis-alignment cosine, four clamped corner
    distances, four unit corner directions (world frame)."""
    p = np.asarray(p_drone, dtype=float)
    to_wp = wp.position - p
    d = np.linalg.norm(to_wp)
    if d > 0.0:
        s_c = float(to_wp @ wp.rotation()[:, 0]) / d
    else:
        s_c = 0.0  # at the waypoint center the direction is undefined
    corners = wp.corners()
    rel = corners - p
    lens = np.linalg.norm(rel, axis=1)
    dists = np.minimum(lens / l_max, 1.0)
    dirs = np.zeros((4, 3))
    nz = lens > 0.0
    dirs[nz] = rel[nz] / lens[nz][:, None]
    return np.concatenate([[s_c], dists, dirs.reshape(-1)])


def build_waypoint_obs(state: RigidBodyState, wp_next: Waypoint,
                       wp_after: Waypoint, l_max: float):
    """34-vector describing the next two target waypoints."""
    return np.concatenate([
        waypoint_block(state.p_w, wp_next, l_max),
        waypoint_block(state.p_w, wp_after, l_max),
    ])


@dataclass
class ObservationBundle:
    depth: DepthImage | None
    state: np.ndarray      # 18
    waypoints: np.ndarray  # 34
    prev_action: np.ndarray  # 4
