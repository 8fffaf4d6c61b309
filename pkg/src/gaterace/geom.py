"""Quaternion, rotation and analytic-primitive geometry used across the simulator.

Conventions: world frame is z-up, body frame is x-forward / y-left / z-up.
Quaternions are scalar-first (w, x, y, z) and rotate body vectors into the
world frame: v_world = rotate(q, v_body).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    return q / math.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Shepperd's method; returns scalar-first unit quaternion."""
    t = np.trace(R)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return quat_normalize(np.array([w, x, y, z]))


def cross3(a, b):
    # np.cross has dispatch overhead that dominates on single 3-vectors
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def quat_rotate(q, v):
    # R(q) v without building the matrix: v + 2 w (u x v) + 2 u x (u x v)
    u = q[1:]
    t = 2.0 * cross3(u, v)
    return v + q[0] * t + cross3(u, t)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return IDENTITY_QUAT.copy()
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) / n * axis))


def quat_integrate(q, omega, dt):
    """Advance attitude by body rate omega (rad/s) over dt via the exponential map.

    Keeps the quaternion on the unit sphere up to roundoff; renormalized anyway.
    """
    w = math.sqrt(omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2)
    theta = w * dt
    half = 0.5 * theta
    if theta > 1e-9:
        dq = np.concatenate(([math.cos(half)], (math.sin(half) / w) * omega))
    else:
        # small-angle series for sin(theta/2)/theta
        dq = np.concatenate(([1.0 - half * half / 2.0], (0.5 - theta * theta / 48.0) * dt * omega))
    return quat_normalize(quat_mul(q, dq))


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_zyx_to_matrix(roll, pitch, yaw):
    """Intrinsic yaw-pitch-roll (about z, then y, then x)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


# ---------------------------------------------------------------------------
# primitives

_CORNER_SIGNS = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                          for sz in (1, -1)], dtype=float)


@dataclass
class OrientedBox:
    """Box with full world pose; half_extents are body-frame half sizes in m."""
    center: np.ndarray
    rot: np.ndarray          # 3x3, box->world
    half_extents: np.ndarray

    def corners(self):
        return self.center + (_CORNER_SIGNS * self.half_extents) @ self.rot.T

    def world_extent(self):
        """Half-widths of the world-axis-aligned bounding box."""
        return np.abs(self.rot) @ self.half_extents


def point_to_box_distance(p, box: OrientedBox):
    """Distance from a point to the box surface; 0 when inside."""
    local = box.rot.T @ (np.asarray(p, dtype=float) - box.center)
    excess = np.abs(local) - box.half_extents
    a = excess[0] if excess[0] > 0.0 else 0.0
    b = excess[1] if excess[1] > 0.0 else 0.0
    c = excess[2] if excess[2] > 0.0 else 0.0
    return math.sqrt(a * a + b * b + c * c)


def point_to_sphere_distance(p, center, radius):
    return max(float(np.linalg.norm(np.asarray(p) - center)) - radius, 0.0)


def point_to_cylinder_distance(p, center, rot, radius, height):
    """Finite closed cylinder; axis along the local z of `rot`, `height` is full length."""
    local = rot.T @ (np.asarray(p, dtype=float) - center)
    dr = math.hypot(local[0], local[1]) - radius
    dz = abs(local[2]) - 0.5 * height
    if dr <= 0.0 and dz <= 0.0:
        return 0.0
    return math.hypot(max(dr, 0.0), max(dz, 0.0))


def point_to_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ d / dd, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * d)))


def segment_to_box_distance(a, b, box: OrientedBox, tol=1e-10):
    """Distance from segment ab to the box (0 on overlap).

    point->box distance is convex along the segment, so golden-section search
    converges to the global minimum.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa = point_to_box_distance(a, box)
    fb = point_to_box_distance(b, box)
    if fa == 0.0 or fb == 0.0:
        return 0.0
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc = point_to_box_distance(a + c * (b - a), box)
    fd = point_to_box_distance(a + d * (b - a), box)
    for _ in range(80):
        if hi - lo < tol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = point_to_box_distance(a + c * (b - a), box)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = point_to_box_distance(a + d * (b - a), box)
    return min(fa, fb, fc, fd)


def boxes_overlap(a: OrientedBox, b: OrientedBox, eps=1e-12):
    """Separating-axis test for two oriented boxes (closed overlap convention)."""
    R = a.rot.T @ b.rot
    t = a.rot.T @ (b.center - a.center)
    absR = np.abs(R) + 1e-12  # guard parallel-edge degeneracy
    ea, eb = a.half_extents, b.half_extents

    # face axes of a
    for i in range(3):
        if abs(t[i]) > ea[i] + float(absR[i] @ eb) + eps:
            return False
    # face axes of b
    for j in range(3):
        if abs(float(t @ R[:, j])) > float(ea @ absR[:, j]) + eb[j] + eps:
            return False
    # edge-edge cross products
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            ra = ea[i1] * absR[i2, j] + ea[i2] * absR[i1, j]
            rb = eb[j1] * absR[i, j2] + eb[j2] * absR[i, j1]
            sep = t[i2] * R[i1, j] - t[i1] * R[i2, j]
            if abs(sep) > ra + rb + eps:
                return False
    return True


def box_overlaps_sphere(box: OrientedBox, center, radius):
    return point_to_box_distance(center, box) <= radius


def box_overlaps_cylinder(box: OrientedBox, center, rot, radius, height):
    """Capsule approximation: overlap when the axis segment is within `radius`.

    Slightly generous at the flat end caps (they are treated as rounded).
    """
    axis = rot[:, 2]
    a = center - 0.5 * height * axis
    b = center + 0.5 * height * axis
    return segment_to_box_distance(a, b, box) <= radius


# ---------------------------------------------------------------------------
# ray casting (vectorized over rays)

def ray_sphere(origins, dirs, center, radius):
    """Smallest positive hit parameter per ray, inf when missed. dirs unit-norm."""
    oc = origins - center
    b = np.einsum("ij,ij->i", oc, dirs)
    c = np.einsum("ij,ij->i", oc, oc) - radius * radius
    disc = b * b - c
    t = np.full(len(dirs), np.inf)
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    near = np.where(t0 > 0.0, t0, t1)
    valid = ok & (near > 0.0)
    t[valid] = near[valid]
    return t


def ray_box(origins, dirs, box: OrientedBox):
    """Slab test in the box frame; smallest positive parameter, inf on miss."""
    o = (origins - box.center) @ box.rot
    d = dirs @ box.rot
    h = box.half_extents
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-h - o) * inv
        t2 = (h - o) * inv
    tmin = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2))
    tmax = np.where(np.isnan(t2), np.inf, np.maximum(t1, t2))
    # rays parallel to a slab: hit only if origin within the slab
    par = d == 0.0
    inside = np.abs(o) <= h
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    lo = tmin.max(axis=1)
    hi = tmax.min(axis=1)
    t = np.where(lo > 0.0, lo, hi)
    t = np.where((hi >= lo) & (t > 0.0), t, np.inf)
    return t


def ray_cylinder(origins, dirs, center, rot, radius, height):
    """Finite closed cylinder (side + caps); smallest positive parameter."""
    o = (origins - center) @ rot
    d = dirs @ rot
    hz = 0.5 * height

    # side surface: quadratic in the xy-plane
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - radius * radius
    disc = b * b - a * c
    ok = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    best = np.full(len(dirs), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / a
            z = o[:, 2] + t * d[:, 2]
            valid = ok & (t > 0.0) & (np.abs(z) <= hz)
            best = np.where(valid & (t < best), t, best)
        # caps
        for zc in (-hz, hz):
            t = (zc - o[:, 2]) / d[:, 2]
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            valid = (d[:, 2] != 0.0) & (t > 0.0) & (x * x + y * y <= radius * radius)
            best = np.where(valid & (t < best), t, best)
    return best


def ray_aabb_interior(origins, dirs, lo, hi):
    """Exit parameter of rays cast from inside an axis-aligned box (the walls)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origins) * inv
        t2 = (hi - origins) * inv
    tmax = np.where(np.isnan(np.maximum(t1, t2)), np.inf, np.maximum(t1, t2))
    return np.maximum(tmax.min(axis=1), 0.0)
