"""Rigid-body quadrotor dynamics with first-order rotor lag and polynomial
actuator/drag wrenches, integrated with semi-implicit Euler at the physics rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import DragParams, DroneParams
from .geom import IDENTITY_QUAT, OrientedBox, cross3, quat_integrate, quat_to_matrix

GRAVITY = np.array([0.0, 0.0, -9.81])  # m/s^2
TWO_PI = 2.0 * math.pi


@dataclass
class RigidBodyState:
    p_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_wb: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    v_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self):
        return RigidBodyState(self.p_w.copy(), self.q_wb.copy(),
                              self.v_w.copy(), self.omega_b.copy())

    def rotation(self):
        return quat_to_matrix(self.q_wb)


@dataclass
class RotorState:
    """Rotor speeds and their steady-state targets, rev/s."""
    speeds: np.ndarray = field(default_factory=lambda: np.zeros(4))
    targets: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def copy(self):
        return RotorState(self.speeds.copy(), self.targets.copy())


@dataclass
class Wrench:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))   # N, body frame
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))  # N m, body frame

    def __add__(self, other):
        return Wrench(self.force + other.force, self.torque + other.torque)


def _polyval(coeffs, x):
    """Ascending-order polynomial evaluation, vectorized over x."""
    acc = np.zeros_like(np.asarray(x, dtype=float))
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def rotor_thrust(drone: DroneParams, speeds):
    return _polyval(drone.thrust_poly, speeds)


def rotor_torque(drone: DroneParams, speeds):
    return _polyval(drone.torque_poly, speeds)


@lru_cache(maxsize=8)
def _rotor_geometry(drone: DroneParams):
    pos = np.asarray(drone.rotor_positions, dtype=float)
    zeta = np.asarray(drone.spin_directions, dtype=float)
    return pos[:, 0].copy(), pos[:, 1].copy(), zeta


def actuator_wrench(rotors: RotorState, rotor_accel, drone: DroneParams) -> Wrench:
    """Thrust along body z plus yaw drag, thrust-offset and rotor-reaction torques.

    rotor_accel is in rev/s^2 and converted to rad/s^2 for the reaction term.
    Per-rotor thrust at offset r contributes torque r x (0,0,f) = (r_y f, -r_x f, 0).
    """
    thrust = rotor_thrust(drone, rotors.speeds)
    yaw_drag = rotor_torque(drone, rotors.speeds)
    r_x, r_y, zeta = _rotor_geometry(drone)
    force = np.array([0.0, 0.0, float(np.sum(thrust))])
    torque = np.array([
        float(r_y @ thrust),
        -float(r_x @ thrust),
        float(zeta @ yaw_drag)
        + drone.rotor_inertia * TWO_PI * float(zeta @ np.asarray(rotor_accel)),
    ])
    return Wrench(force, torque)


def drag_wrench(v_b, omega_b, drag: DragParams) -> Wrench:
    """Quadratic-plus-linear aerodynamic drag; quadratic terms sign-preserving."""
    v = np.asarray(v_b, dtype=float)
    w = np.asarray(omega_b, dtype=float)
    c0, c1 = np.asarray(drag.c0), np.asarray(drag.c1)
    c2, c3 = np.asarray(drag.c2), np.asarray(drag.c3)
    force = -0.5 * drag.air_density * drag.area_t * (c0 * np.abs(v) * v + c1 * v)
    torque = -0.5 * drag.air_density * drag.area_r * (c2 * np.abs(w) * w + c3 * w)
    return Wrench(force, torque)


def rotor_step(rotors: RotorState, k_r: float, dt: float):
    """Exact first-order-lag discretization; returns pre-step accel in rev/s^2."""
    accel = k_r * (rotors.targets - rotors.speeds)
    decay = math.exp(-k_r * dt)
    speeds = rotors.targets + (rotors.speeds - rotors.targets) * decay
    return RotorState(speeds, rotors.targets.copy()), accel


def rigid_body_step(state: RigidBodyState, total: Wrench, drone: DroneParams,
                    dt: float, gravity=GRAVITY, R=None) -> RigidBodyState:
    """One semi-implicit Euler step; wrench is given in the body frame.

    R may carry a precomputed rotation matrix of state.q_wb.
    """
    if not (np.all(np.isfinite(total.force)) and np.all(np.isfinite(total.torque))):
        raise FloatingPointError("non-finite wrench fed to rigid_body_step")
    if R is None:
        R = quat_to_matrix(state.q_wb)
    J = np.asarray(drone.inertia)
    v = state.v_w + dt * (gravity + R @ total.force / drone.mass)
    p = state.p_w + dt * v
    omega = state.omega_b + dt * (total.torque - cross3(state.omega_b, J * state.omega_b)) / J
    q = quat_integrate(state.q_wb, omega, dt)
    return RigidBodyState(p, q, v, omega)


def oriented_collision_box(state: RigidBodyState, drone: DroneParams) -> OrientedBox:
    return OrientedBox(state.p_w.copy(), state.rotation(),
                       np.asarray(drone.collision_half_extents, dtype=float))


def hover_rotor_speed(drone: DroneParams, g: float = 9.81) -> float:
    """Rotor speed (rev/s) where four rotors exactly carry the weight; bisection."""
    target = drone.mass * g / 4.0
    lo, hi = 0.0, 1.0
    while float(rotor_thrust(drone, hi)) < target:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("thrust polynomial cannot reach hover thrust")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(rotor_thrust(drone, mid)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
