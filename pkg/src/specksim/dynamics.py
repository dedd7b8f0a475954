"""Point-mass flight kinematics and position control.

The drone is modeled as a point mass with attitude abstracted away: the
controller outputs a force, thrust converts to force through a calibration
curve with measurement noise, and rotor downwash from drones above acts as a
disturbance acceleration. Integration is semi-implicit Euler (v first, then
p with the new v), which stays stable for stiff position gains at the
default dt of 0.01 s.

All functions here are pure over value types and safe to call from any
number of actors concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .vec import Vec3, ZERO, is_finite

DEFAULT_DT = 0.01


class OutOfRange(Exception):
    pass


class NonFiniteInput(Exception):
    pass


class ControllerGains(BaseModel):
    """Position-loop gains; ki=0 disables the integral term entirely."""

    kp: float = Field(default=10.0, gt=0.0)
    kd: float = Field(default=1.0, ge=0.0)
    ki: float = Field(default=0.0, ge=0.0)
    integral_clamp: float = Field(default=math.inf, gt=0.0)  # N; inf = no anti-windup
    mass: float = Field(default=0.05, gt=0.0)


class CalibrationCurve(BaseModel):
    """Thrust-fraction to force table, (u, mean_force, sigma) sorted by u.

    The u=0 entry is forced to (0, 0, 0): zero throttle produces no force
    and no spread.
    """

    points: list[tuple[float, float, float]]

    @model_validator(mode="after")
    def _check(self):
        pts = [(float(u), float(m), float(s)) for u, m, s in self.points]
        if not pts:
            raise ValueError("calibration curve needs at least one point")
        if any(not (0.0 <= u <= 1.0) for u, _, _ in pts):
            raise ValueError("thrust fractions must lie in [0, 1]")
        if sorted(u for u, _, _ in pts) != [u for u, _, _ in pts]:
            raise ValueError("points must be sorted by u")
        if pts[0][0] > 0.0:
            pts.insert(0, (0.0, 0.0, 0.0))
        pts[0] = (0.0, 0.0, 0.0)
        means = [m for _, m, _ in pts]
        if any(b < a for a, b in zip(means, means[1:])):
            raise ValueError("mean force must be non-decreasing in u")
        if any(s < 0.0 for _, _, s in pts):
            raise ValueError("sigma must be >= 0")
        self.points = pts
        return self

    @property
    def max_force(self) -> float:
        return self.points[-1][1]

    def arrays(self):
        pts = np.asarray(self.points, dtype=float)
        return pts[:, 0], pts[:, 1], pts[:, 2]


def default_calibration_curve() -> CalibrationCurve:
    """Quadratic force law peaking at 3.5 N, with the published 0.43 N spread
    at 90% thrust; the spread rises linearly up to 0.9 and stays flat after."""
    pts = []
    for i in range(11):
        u = i / 10.0
        sigma = 0.43 * min(u / 0.9, 1.0)
        pts.append((u, 3.5 * u * u, sigma))
    return CalibrationCurve(points=pts)


class MotionLimits(BaseModel):
    max_speed: float = Field(default=2.0, gt=0.0)         # m/s
    min_turn_radius: float = Field(default=0.1, ge=0.0)   # m
    min_clearance: float = Field(default=0.15, ge=0.0)    # m, vertical stacking
    thrust_headroom: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_force: float = Field(default=3.5, gt=0.0)         # N, calibration ceiling


class DownwashParams(BaseModel):
    k: float = Field(default=0.002, ge=0.0)               # N*m^2
    half_angle: float = Field(default=math.radians(15.0), gt=0.0, lt=math.pi / 2)


@dataclass
class KinematicState:
    position: Vec3 = ZERO
    velocity: Vec3 = ZERO


@dataclass
class LimitFlags:
    speed: bool = False
    turn_radius: bool = False
    force: bool = False

    def any(self) -> bool:
        return self.speed or self.turn_radius or self.force


def integrate(state: KinematicState, accel: Vec3, dt: float) -> KinematicState:
    """Semi-implicit Euler step: v' = v + a*dt, p' = p + v'*dt."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if not (is_finite(accel) and is_finite(state.position) and is_finite(state.velocity)):
        raise NonFiniteInput("non-finite kinematic input")
    vx = state.velocity[0] + accel[0] * dt
    vy = state.velocity[1] + accel[1] * dt
    vz = state.velocity[2] + accel[2] * dt
    p = state.position
    return KinematicState((p[0] + vx * dt, p[1] + vy * dt, p[2] + vz * dt),
                          (vx, vy, vz))


def pd_force(gains: ControllerGains, error: Vec3, error_rate: Vec3) -> Vec3:
    """F = kp*e + kd*de/dt, per axis."""
    kp, kd = gains.kp, gains.kd
    return (kp * error[0] + kd * error_rate[0],
            kp * error[1] + kd * error_rate[1],
            kp * error[2] + kd * error_rate[2])


def pid_force(gains: ControllerGains, error: Vec3, error_rate: Vec3,
              integral: Vec3, dt: float) -> tuple[Vec3, Vec3]:
    """PD force plus a clamped integral term.

    The integral state is clamped componentwise to +/- integral_clamp/ki so
    the integral contribution never exceeds integral_clamp newtons. With
    ki=0 this is exactly pd_force and the integral state is left untouched.

    Returns:
        (force, updated integral state)
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    base = pd_force(gains, error, error_rate)
    ki = gains.ki
    if ki == 0.0:
        return base, integral
    bound = gains.integral_clamp / ki
    new_int = tuple(
        min(max(integral[i] + error[i] * dt, -bound), bound) for i in range(3)
    )
    force = tuple(base[i] + ki * new_int[i] for i in range(3))
    return force, new_int


def thrust_to_force(curve: CalibrationCurve, u: float, rng=None) -> float:
    """Force produced at thrust fraction u.

    Mean and sigma are linearly interpolated from the curve. With an rng the
    sample is mean + N(0, sigma^2), clamped at zero (a rotor cannot pull).
    """
    if not 0.0 <= u <= 1.0:
        raise OutOfRange(f"thrust fraction {u} outside [0, 1]")
    us, means, sigmas = curve.arrays()
    mean = float(np.interp(u, us, means))
    if rng is None:
        return mean
    sigma = float(np.interp(u, us, sigmas))
    if sigma > 0.0:
        mean += float(rng.normal(0.0, sigma))
    return max(0.0, mean)


def downwash_accel(self_pos: Vec3, others: list[Vec3], params: DownwashParams,
                   mass: float) -> Vec3:
    """Disturbance acceleration from rotor wash of drones above self.

    Every other drone strictly above and inside the downward cone of the
    given half-angle contributes a downward force k / dz^2; the summed force
    is divided by mass. Drones below or outside the cone contribute nothing.
    """
    if params.k == 0.0 or not others:
        return ZERO
    tan_half = math.tan(params.half_angle)
    force = 0.0
    x, y, z = self_pos
    for ox, oy, oz in others:
        dz = oz - z
        if dz <= 0.0:
            continue
        lateral = math.hypot(ox - x, oy - y)
        if lateral > dz * tan_half:
            continue
        force += params.k / (dz * dz)
    if force == 0.0:
        return ZERO
    return (0.0, 0.0, -force / mass)


def clearance_violations(self_pos: Vec3, others: list[Vec3],
                         params: DownwashParams, min_clearance: float) -> int:
    """Count drones above self, inside the wash cone, closer than min_clearance."""
    tan_half = math.tan(params.half_angle)
    x, y, z = self_pos
    count = 0
    for ox, oy, oz in others:
        dz = oz - z
        if 0.0 < dz < min_clearance and math.hypot(ox - x, oy - y) <= dz * tan_half:
            count += 1
    return count


def enforce_limits(state: KinematicState, accel: Vec3, limits: MotionLimits,
                   dt: float, mass: float,
                   disturbance: Vec3 = ZERO) -> tuple[KinematicState, LimitFlags]:
    """Apply actuation and airframe limits around one integration step.

    The commanded force mass*accel is capped at (1 - thrust_headroom) of the
    calibration ceiling (the headroom stays reserved for disturbances, which
    is why `disturbance` is added after the cap). A turn-radius flag is
    raised when the centripetal component of the commanded acceleration
    would bend the current velocity tighter than min_turn_radius. After
    integration the speed is clipped back to max_speed if exceeded.
    """
    flags = LimitFlags()
    ax, ay, az = accel
    a_norm = math.sqrt(ax * ax + ay * ay + az * az)
    max_accel = (1.0 - limits.thrust_headroom) * limits.max_force / mass
    if a_norm > max_accel:
        f = max_accel / a_norm
        ax, ay, az = ax * f, ay * f, az * f
        flags.force = True

    vx, vy, vz = state.velocity
    v_sq = vx * vx + vy * vy + vz * vz
    if v_sq > 1e-18:
        along = (ax * vx + ay * vy + az * vz) / v_sq
        px, py, pz = ax - along * vx, ay - along * vy, az - along * vz
        a_perp = math.sqrt(px * px + py * py + pz * pz)
        if a_perp > 1e-12 and v_sq / a_perp < limits.min_turn_radius:
            flags.turn_radius = True

    total = (ax + disturbance[0], ay + disturbance[1], az + disturbance[2])
    new = integrate(state, total, dt)
    nvx, nvy, nvz = new.velocity
    speed = math.sqrt(nvx * nvx + nvy * nvy + nvz * nvz)
    if speed > limits.max_speed:
        f = limits.max_speed / speed
        new = KinematicState(new.position, (nvx * f, nvy * f, nvz * f))
        flags.speed = True
    return new, flags


class PositionController:
    """Closed-loop helper that feeds the force law a backward-difference rate.

    error_rate at step k is (e_k - e_{k-1}) / dt, zero on the first step;
    there is no separate velocity sensor model.
    """

    def __init__(self, gains: ControllerGains):
        self.gains = gains
        self.integral: Vec3 = ZERO
        self.prev_error: Vec3 | None = None

    def step(self, error: Vec3, dt: float) -> Vec3:
        if self.prev_error is None:
            rate = ZERO
        else:
            pe = self.prev_error
            rate = ((error[0] - pe[0]) / dt,
                    (error[1] - pe[1]) / dt,
                    (error[2] - pe[2]) / dt)
        self.prev_error = error
        if self.gains.ki == 0.0:
            return pd_force(self.gains, error, rate)
        force, self.integral = pid_force(self.gains, error, rate,
                                         self.integral, dt)
        return force

    def reset(self) -> None:
        self.integral = ZERO
        self.prev_error = None
