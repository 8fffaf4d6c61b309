import dataclasses
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from gaterace.config import CameraParams, ObsNormParams
from gaterace.dynamics import RigidBodyState
from gaterace.geom import quat_from_axis_angle, rot_y
from gaterace.sensors import (
    CameraPose,
    build_state_obs,
    build_waypoint_obs,
    camera_pose,
    render_depth,
    waypoint_block,
)
from gaterace.track import Obstacle, Waypoint

CAM = CameraParams(width=49, height=27, d_max=20.0,
                   mount_position=(0.0, 0.0, 0.0), tilt_angle=0.0)
NORM = ObsNormParams()


def rand_state(rng):
    return RigidBodyState(
        p_w=rng.uniform(-10, 10, size=3),
        q_wb=quat_from_axis_angle(rng.normal(size=3), rng.uniform(-3, 3)),
        v_w=rng.uniform(-20, 20, size=3),
        omega_b=rng.uniform(-10, 10, size=3),
    )


# -- camera pose --------------------------------------------------------------

def test_camera_pose_identity():
    pose = camera_pose(RigidBodyState(), CAM)
    assert np.allclose(pose.position, 0.0)
    assert np.allclose(pose.optical_axis, [1, 0, 0])


def test_camera_pose_tilt_raises_axis():
    cam = dataclasses.replace(CAM, tilt_angle=math.radians(30))
    pose = camera_pose(RigidBodyState(), cam)
    assert pose.optical_axis[2] == pytest.approx(math.sin(math.radians(30)), abs=1e-12)
    assert pose.optical_axis[0] == pytest.approx(math.cos(math.radians(30)), abs=1e-12)


def test_camera_pose_random_attitude_oracle():
    rng = np.random.default_rng(8)
    cam = dataclasses.replace(CAM, tilt_angle=0.4, mount_position=(0.1, -0.02, 0.05))
    for _ in range(50):
        state = rand_state(rng)
        pose = camera_pose(state, cam)
        R_wb = Rotation.from_quat(np.roll(state.q_wb, -1)).as_matrix()
        expected_axis = R_wb @ rot_y(-0.4) @ np.array([1.0, 0, 0])
        assert np.allclose(pose.optical_axis, expected_axis, atol=1e-9)
        assert np.allclose(pose.position, state.p_w + R_wb @ cam.mount_position, atol=1e-9)


# -- depth rendering ----------------------------------------------------------

def test_empty_scene_all_ones():
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [])
    assert img.values.shape == (27, 49)
    assert np.all(img.values == 1.0)


def oracle_dirs(cam):
    """Independent pinhole ray construction."""
    tan_h = math.tan(cam.hfov / 2)
    tan_v = tan_h * cam.height / cam.width
    dirs = np.zeros((cam.height, cam.width, 3))
    for i in range(cam.height):
        for j in range(cam.width):
            u = (2 * (j + 0.5) / cam.width - 1) * tan_h
            v = (2 * (i + 0.5) / cam.height - 1) * tan_v
            d = np.array([1.0, -u, -v])
            dirs[i, j] = d / np.linalg.norm(d)
    return dirs


def test_wall_plane_closed_form():
    # 0.2 m thick giant slab with its near face 5 m ahead
    wall = Obstacle("cuboid", np.array([5.1, 0.0, 0.0]), np.array([1.0, 0, 0, 0]),
                    (0.2, 500.0, 500.0))
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [wall])
    dirs = oracle_dirs(CAM)
    expected = np.minimum(5.0 / dirs[:, :, 0] / CAM.d_max, 1.0)
    assert np.max(np.abs(img.values - expected)) < 1e-6
    center = img.values[13, 24]
    assert center == pytest.approx(0.25, abs=1e-9)
    assert np.all(img.values >= center - 1e-12)


def test_sphere_closed_form():
    sphere = Obstacle("sphere", np.array([10.0, 0.0, 0.0]), np.array([1.0, 0, 0, 0]), (1.0,))
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [sphere])
    assert img.values[13, 24] == pytest.approx(9.0 / 20.0, abs=1e-9)
    dirs = oracle_dirs(CAM)
    # independent quadratic per pixel
    oc = -sphere.position
    for i in range(0, 27, 5):
        for j in range(0, 49, 7):
            d = dirs[i, j]
            b = float(oc @ d)
            disc = b * b - (float(oc @ oc) - 1.0)
            if disc < 0:
                expected = 1.0
            else:
                t = -b - math.sqrt(disc)
                expected = min(t / 20.0, 1.0) if t > 0 else 1.0
            assert img.values[i, j] == pytest.approx(expected, abs=1e-6)


def test_cylinder_cap_and_side():
    cyl = Obstacle("cylinder", np.array([6.0, 0.0, 0.0]),
                   np.array([math.cos(math.pi / 4), 0.0, math.sin(math.pi / 4), 0.0]),
                   (1.0, 4.0))  # axis along world x after 90 deg pitch
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [cyl])
    assert img.values[13, 24] == pytest.approx(4.0 / 20.0, abs=1e-6)  # near cap at x=4


def test_render_order_invariant():
    rng = np.random.default_rng(0)
    obstacles = []
    for _ in range(8):
        kind = rng.choice(["cuboid", "cylinder", "sphere"])
        pos = rng.uniform(-8, 8, size=3) + np.array([8.0, 0, 0])
        q = quat_from_axis_angle(rng.normal(size=3), rng.uniform(0, 3))
        dims = {"cuboid": (1.0, 2.0, 0.5), "cylinder": (0.5, 2.0), "sphere": (0.8,)}[kind]
        obstacles.append(Obstacle(kind, pos, q, dims))
    pose = CameraPose(np.zeros(3), np.eye(3))
    a = render_depth(pose, CAM, obstacles)
    order = rng.permutation(len(obstacles))
    b = render_depth(pose, CAM, [obstacles[i] for i in order])
    assert np.array_equal(a.values, b.values)


def test_env_bounds_walls_visible():
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [],
                       env_bounds=((-40, -40, -20), (40, 40, 20)))
    assert np.all(img.values == 1.0)  # walls beyond 20 m range
    near = render_depth(CameraPose(np.array([35.0, 0, 0]), np.eye(3)), CAM, [],
                        env_bounds=((-40, -40, -20), (40, 40, 20)))
    assert near.values[13, 24] == pytest.approx(5.0 / 20.0, abs=1e-9)


def test_depth_values_in_unit_range_and_miss_exactly_one():
    rng = np.random.default_rng(2)
    obstacles = [Obstacle("sphere", np.array([4.0, 1.0, 0.0]), np.array([1.0, 0, 0, 0]), (0.5,))]
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, obstacles)
    assert np.all(img.values >= 0.0) and np.all(img.values <= 1.0)
    assert np.any(img.values == 1.0)  # off-sphere pixels saturate exactly


def test_pgm_export(tmp_path):
    img = render_depth(CameraPose(np.zeros(3), np.eye(3)), CAM, [])
    path = tmp_path / "d.pgm"
    img.to_pgm(path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n49 27\n65535\n")
    assert len(data) == len(b"P5\n49 27\n65535\n") + 49 * 27 * 2


# -- state observation ---------------------------------------------------------

def test_state_obs_initial_rest():
    obs = build_state_obs(RigidBodyState(), np.zeros(3), NORM)
    expected = np.zeros(18)
    expected[3:12] = np.eye(3).reshape(-1)  # columns of identity
    assert np.allclose(obs, expected)


def test_state_obs_velocity_saturates():
    st = RigidBodyState(v_w=np.array([100.0, -70.0, 2.0]))
    obs = build_state_obs(st, np.zeros(3), NORM)
    assert obs[12] == 1.0 and obs[13] == -1.0
    assert obs[14] == pytest.approx(2.0 / NORM.v_max)


def scalar_state_obs_oracle(state, p0, norm):
    R = Rotation.from_quat(np.roll(state.q_wb, -1)).as_matrix()
    out = []
    for k in range(3):
        out.append((state.p_w[k] - p0[k]) / norm.p_max)
    for col in range(3):
        for row in range(3):
            out.append(R[row, col])
    for k in range(3):
        out.append(state.v_w[k] / norm.v_max)
    for k in range(3):
        out.append(state.omega_b[k] / norm.omega_max)
    return np.clip(np.array(out), -1, 1)


def test_state_obs_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        st = rand_state(rng)
        p0 = rng.uniform(-5, 5, size=3)
        assert np.allclose(build_state_obs(st, p0, NORM),
                           scalar_state_obs_oracle(st, p0, NORM), atol=1e-9)


# -- waypoint observation -------------------------------------------------------

def make_wp(pos, q, w, h):
    return Waypoint(np.asarray(pos, dtype=float), np.asarray(q, dtype=float), w, h)


def test_waypoint_obs_far_on_axis():
    wp = make_wp([0, 0, 0], [1, 0, 0, 0], 2.0, 2.0)
    st = RigidBodyState(p_w=np.array([-100.0, 0.0, 0.0]))
    block = waypoint_block(st.p_w, wp, l_max=20.0)
    assert block[0] == pytest.approx(1.0, abs=1e-4)
    assert np.allclose(block[1:5], 1.0)  # distances clamp at l_max
    assert np.allclose(block[1:5], block[1])  # squares stay symmetric


def test_waypoint_obs_center_degenerate():
    wp = make_wp([0, 0, 0], [1, 0, 0, 0], 2.0, 2.0)
    block = waypoint_block(np.zeros(3), wp, l_max=20.0)
    assert block[0] == 0.0


def test_waypoint_obs_at_corner_zero_filled():
    wp = make_wp([0, 0, 0], [1, 0, 0, 0], 2.0, 2.0)
    corner = wp.corners()[0]
    block = waypoint_block(corner, wp, l_max=20.0)
    assert block[1] == 0.0
    assert np.allclose(block[5:8], 0.0)


def scalar_waypoint_oracle(p, wp, l_max):
    R = Rotation.from_quat(np.roll(wp.quaternion, -1)).as_matrix()
    to_wp = wp.position - p
    n = math.sqrt(sum(v * v for v in to_wp))
    s_c = 0.0 if n == 0 else sum(a * b for a, b in zip(to_wp, R[:, 0])) / n
    hw, hh = wp.width / 2, wp.height / 2
    corners = [wp.position + R @ np.array([0.0, sy * hw, sz * hh])
               for sy, sz in ((1, 1), (-1, 1), (-1, -1), (1, -1))]
    out = [s_c]
    dirs = []
    for c in corners:
        rel = c - p
        l = math.sqrt(sum(v * v for v in rel))
        out.append(min(l / l_max, 1.0))
        dirs.append(rel / l if l > 0 else np.zeros(3))
    for d in dirs:
        out.extend(d)
    return np.array(out)


def test_waypoint_obs_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        wp = make_wp(rng.uniform(-10, 10, size=3),
                     quat_from_axis_angle(rng.normal(size=3), rng.uniform(0, 3)),
                     rng.uniform(1.4, 2.0), rng.uniform(1.4, 2.0))
        st = rand_state(rng)
        got = waypoint_block(st.p_w, wp, 20.0)
        want = scalar_waypoint_oracle(st.p_w, wp, 20.0)
        assert np.allclose(got, want, atol=1e-9)


def test_full_waypoint_obs_dims_and_norms():
    rng = np.random.default_rng(6)
    wp1 = make_wp([5, 0, 0], [1, 0, 0, 0], 1.5, 1.8)
    wp2 = make_wp([10, 2, 1], quat_from_axis_angle([0, 0, 1], 0.5), 2.0, 1.4)
    st = rand_state(rng)
    obs = build_waypoint_obs(st, wp1, wp2, 20.0)
    assert obs.shape == (34,)
    for base in (0, 17):
        assert -1.0 <= obs[base] <= 1.0
        assert np.all(obs[base + 1:base + 5] >= 0.0) and np.all(obs[base + 1:base + 5] <= 1.0)
        for k in range(4):
            v = obs[base + 5 + 3 * k:base + 8 + 3 * k]
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-6)
