"""Rate controller in the style of open-source flight firmware: an
actual-rates stick curve, a rate PID with derivative-on-measurement, and an
air-mode mixer for an X-quad.

Motor layout (top view, x forward / y left):

      4 FL   2 FR          mixer signs per motor: roll  = sign(y)
         \\ //                                    pitch = sign(-x)
         / \\                                     yaw   = spin direction
      3 RL   1 RR

Rotors 1 and 4 yaw the body positively (+z), 2 and 3 negatively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ControllerParams, DroneParams
from .dynamics import _polyval


@dataclass
class ControlCommand:
    """Normalized stick command: roll/pitch/yaw rate channels plus throttle."""
    a: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.a = np.clip(np.asarray(self.a, dtype=float), -1.0, 1.0)

    @property
    def rates(self):
        return self.a[:3]

    @property
    def throttle(self):
        return float(self.a[3])

    def copy(self):
        return ControlCommand(self.a.copy())


@dataclass
class RateControllerState:
    params: ControllerParams
    integrator: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_meas: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self):
        return RateControllerState(self.params, self.integrator.copy(), self.last_meas.copy())


@dataclass
class MotorCommand:
    u: np.ndarray = field(default_factory=lambda: np.zeros(4))


def mixer_matrix(drone: DroneParams):
    """Per-motor (roll, pitch, yaw) contribution signs derived from geometry."""
    rows = []
    for pos, zeta in zip(drone.rotor_positions, drone.spin_directions):
        rows.append([np.sign(pos[1]), np.sign(-pos[0]), float(zeta)])
    return np.asarray(rows)


def rates_curve(a_rates, params: ControllerParams):
    """Map stick deflection in [-1,1] to a desired body rate (rad/s).

    Odd and monotone per axis; full deflection gives exactly max_rate.
    """
    x = np.clip(np.asarray(a_rates, dtype=float), -1.0, 1.0)
    m = np.asarray(params.max_rate)
    c = np.asarray(params.center_sensitivity)
    e = np.asarray(params.expo)
    return c * x + (m - c) * x * np.abs(x) ** (1.0 + e)


def pid_step(ctrl: RateControllerState, omega_des, omega_meas, dt: float):
    """One rate-PID update; returns a normalized torque demand in [-1,1]^3."""
    p = ctrl.params
    err = np.asarray(omega_des) - np.asarray(omega_meas)
    integ = np.clip(ctrl.integrator + np.asarray(p.ki) * err * dt, -p.i_limit, p.i_limit)
    d_meas = (np.asarray(omega_meas) - ctrl.last_meas) / dt
    out = np.asarray(p.kp) * err + integ - np.asarray(p.kd) * d_meas
    new_state = RateControllerState(p, integ, np.asarray(omega_meas, dtype=float).copy())
    return np.clip(out, -1.0, 1.0), new_state


def mix(torque_demand, throttle: float, mixer, idle: float) -> MotorCommand:
    """Allocate torque demand and throttle to four motors, air-mode style.

    The throttle is remapped from [-1,1] to [0,1] and shifted so the per-motor
    torque contributions survive saturation; if the demanded span itself
    exceeds the usable range it is rescaled first.
    """
    t01 = 0.5 * (float(throttle) + 1.0)
    contrib = mixer @ np.asarray(torque_demand, dtype=float)
    span = float(contrib.max() - contrib.min())
    avail = 1.0 - idle
    if span > avail:
        contrib *= avail / span
    base = float(np.clip(t01, idle - contrib.min(), 1.0 - contrib.max()))
    return MotorCommand(np.clip(base + contrib, idle, 1.0))


def motor_steady_state(u: MotorCommand, drone: DroneParams):
    """Steady-state rotor speeds (rev/s) for motor commands in [0,1]."""
    return _polyval(drone.motor_poly, np.clip(u.u, 0.0, 1.0))


def hover_motor_command(drone: DroneParams, g: float = 9.81) -> float:
    """Motor command u where four rotors exactly carry the weight; bisection."""
    target = drone.mass * g / 4.0

    def thrust(u):
        return float(_polyval(drone.thrust_poly, _polyval(drone.motor_poly, u)))

    lo, hi = 0.0, 1.0
    if thrust(1.0) < target:
        raise ValueError("motor model cannot hover this drone")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if thrust(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hover_throttle(drone: DroneParams, g: float = 9.81) -> float:
    """Throttle channel value (in [-1,1]) that balances gravity at zero tilt."""
    return 2.0 * hover_motor_command(drone, g) - 1.0
