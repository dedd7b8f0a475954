"""Swarm behaviors: target assignment, potential-field guidance, reactive
avoidance, circle formation paths, heartbeat failure handling with standby
takeover, and the battery/charging lifecycle.

Guidance uses the classic quadratic-attractive / inverse-repulsive potential
with a cutoff radius. When the net repulsion lands exactly anti-parallel to
the attraction (the textbook local-minimum trap), the repulsion is rotated
by a fixed 0.01 rad about +z - a deterministic escape that keeps replays
bit-exact, unlike a random perturbation.

The drone role machine is
    Illuminating -> {ToCharger, Failed}
    ToCharger    -> {Charging, Failed}
    Charging     -> Standby
    Standby      -> {Illuminating, Failed}
with Failed terminal; every mutation goes through transition() which
enforces it. Standby drones sit on hangar tiles and Charging drones on the
coil, so only Illuminating and ToCharger drain battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.optimize
from pydantic import BaseModel, Field, model_validator

from . import vec
from .dynamics import KinematicState
from .vec import Vec3


class NotEnoughFLS(Exception):
    pass


class NeighborCoincident(Exception):
    pass


class InvalidTransition(Exception):
    pass


class Role(Enum):
    ILLUMINATING = "illuminating"
    STANDBY = "standby"
    TO_CHARGER = "to_charger"
    CHARGING = "charging"
    FAILED = "failed"


ALLOWED_TRANSITIONS = {
    Role.ILLUMINATING: {Role.TO_CHARGER, Role.FAILED},
    Role.TO_CHARGER: {Role.CHARGING, Role.FAILED},
    Role.CHARGING: {Role.STANDBY},
    Role.STANDBY: {Role.ILLUMINATING, Role.FAILED},
    Role.FAILED: set(),
}

FLYING_ROLES = {Role.ILLUMINATING, Role.TO_CHARGER}


@dataclass
class FLSRecord:
    id: str
    kinematics: KinematicState = field(default_factory=KinematicState)
    role: Role = Role.STANDBY
    battery: float = 600.0           # seconds of flight remaining
    target: Vec3 | None = None
    color: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        if self.battery < 0.0:
            raise ValueError("battery must be >= 0")
        if self.role is Role.ILLUMINATING and self.target is None:
            raise ValueError("an illuminating drone must have a target")


def transition(record: FLSRecord, new_role: Role) -> FLSRecord:
    """Move record to new_role, enforcing the role machine."""
    if new_role not in ALLOWED_TRANSITIONS[record.role]:
        raise InvalidTransition(f"{record.role.value} -> {new_role.value}")
    record.role = new_role
    return record


class APFParams(BaseModel):
    k_att: float = Field(default=2.0, gt=0.0)        # 1/s
    k_rep: float = Field(default=0.05, ge=0.0)       # m^3/s
    d0: float = Field(default=0.5, gt=0.0)           # influence radius, m
    safety_radius: float = Field(default=0.1, gt=0.0)
    v_max: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _radii(self):
        if self.d0 <= self.safety_radius:
            raise ValueError("d0 must exceed safety_radius")
        return self


class ChargingPolicy(BaseModel):
    drain_rate: float = Field(default=1.0, gt=0.0)       # battery-s per sim-s flying
    recharge_rate: float = Field(default=5.0, gt=0.0)    # battery-s per sim-s docked
    reserve: float = Field(default=60.0, gt=0.0)         # s
    charger_position: tuple[float, float, float] = (0.0, 0.0, 3.8)
    full_battery: float = Field(default=600.0, gt=0.0)   # s

    @model_validator(mode="after")
    def _reserve(self):
        if self.reserve >= self.full_battery:
            raise ValueError("reserve must be < full_battery")
        return self


class HeartbeatPolicy(BaseModel):
    period: float = Field(default=0.5, gt=0.0)
    miss_limit: int = Field(default=3, ge=1)


@dataclass
class Assignment:
    mapping: dict[int, int]   # fls index -> target index
    method: str               # "optimal" or "greedy"

    def total_cost(self, fls_positions, targets) -> float:
        return sum(vec.dist(fls_positions[i], targets[j])
                   for i, j in self.mapping.items())


def assign_targets(fls_positions: list[Vec3], targets: list[Vec3],
                   max_optimal: int = 200) -> Assignment:
    """Injective fls->target mapping minimizing total Euclidean distance.

    Solved exactly (Hungarian-style O(n^3)) up to max_optimal drones; above
    that a greedy nearest-pair sweep is used and flagged in the result so
    the run summary can report it. Drones left unmapped are the standby
    surplus.
    """
    if len(fls_positions) < len(targets):
        raise NotEnoughFLS(
            f"{len(targets)} targets but only {len(fls_positions)} drones")
    if not targets:
        return Assignment({}, "optimal")
    fls = np.asarray(fls_positions, dtype=float)
    tgt = np.asarray(targets, dtype=float)
    cost = np.linalg.norm(fls[:, None, :] - tgt[None, :, :], axis=2)
    if len(fls_positions) <= max_optimal:
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        return Assignment({int(r): int(c) for r, c in zip(rows, cols)}, "optimal")
    mapping: dict[int, int] = {}
    taken_f: set[int] = set()
    taken_t: set[int] = set()
    order = np.dstack(np.unravel_index(np.argsort(cost, axis=None), cost.shape))[0]
    for f, t in order:
        f, t = int(f), int(t)
        if f in taken_f or t in taken_t:
            continue
        mapping[f] = t
        taken_f.add(f)
        taken_t.add(t)
        if len(mapping) == len(targets):
            break
    return Assignment(mapping, "greedy")


def _repulsion(self_pos: Vec3, neighbors, p: APFParams) -> Vec3:
    rx = ry = rz = 0.0
    x, y, z = self_pos
    d0 = p.d0
    k_rep = p.k_rep
    for nx, ny, nz in neighbors:
        dx, dy, dz = x - nx, y - ny, z - nz
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d < 1e-9:
            raise NeighborCoincident(f"neighbor coincides with {self_pos}")
        if d >= d0:
            continue
        mag = k_rep * (1.0 / d - 1.0 / d0) / (d * d * d)  # extra /d normalizes
        rx += mag * dx
        ry += mag * dy
        rz += mag * dz
    return (rx, ry, rz)


def _nudge_if_antiparallel(attraction: Vec3, repulsion: Vec3) -> Vec3:
    """Rotate the net repulsion 0.01 rad when it exactly opposes attraction,
    breaking the head-on local minimum deterministically."""
    na = vec.norm(attraction)
    nr = vec.norm(repulsion)
    if na < 1e-12 or nr < 1e-12:
        return repulsion
    d = vec.dot(attraction, repulsion) / (na * nr)
    if d > -1.0 + 1e-6:
        return repulsion
    if math.hypot(repulsion[0], repulsion[1]) < 1e-12 * nr:
        return vec.rotate_x(repulsion, 0.01)  # vertical pair: +z rotation is a no-op
    return vec.rotate_z(repulsion, 0.01)


def apf_velocity(self_pos: Vec3, goal: Vec3, neighbors, p: APFParams) -> Vec3:
    """Velocity command from the attractive+repulsive potential field,
    clipped to v_max."""
    attraction = vec.scale(vec.sub(self_pos, goal), -p.k_att)
    repulsion = _repulsion(self_pos, neighbors, p)
    repulsion = _nudge_if_antiparallel(attraction, repulsion)
    return vec.clip_norm(vec.add(attraction, repulsion), p.v_max)


def reactive_avoid(cmd: Vec3, self_pos: Vec3, neighbor_positions, p: APFParams) -> Vec3:
    """Add only the locally-sensed repulsion to an arbitrary velocity command;
    needs no central planner."""
    if not vec.is_finite(cmd):
        raise ValueError("command velocity must be finite")
    repulsion = _repulsion(self_pos, neighbor_positions, p)
    return vec.clip_norm(vec.add(cmd, repulsion), p.v_max)


class CirclePlane(Enum):
    XY = "xy"
    XZ = "xz"
    SLANT45 = "slant45"


def circle_basis(plane: CirclePlane) -> tuple[Vec3, Vec3]:
    """Orthonormal in-plane basis (first, second axis) for each orientation."""
    if plane is CirclePlane.XY:
        return (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    if plane is CirclePlane.XZ:
        return (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)
    s = math.sqrt(0.5)
    return (1.0, 0.0, 0.0), (0.0, s, s)


def circle_waypoint(radius: float, speed: float, plane: CirclePlane,
                    phase: float, t: float, center: Vec3) -> Vec3:
    """Point on a circular path of given radius traversed at constant speed.

    The horizontal circle is rotated about the x-axis by 90 degrees for the
    vertical orientation and by 45 degrees for the slanted one.
    """
    if radius <= 0.0 or speed <= 0.0:
        raise ValueError("radius and speed must be > 0")
    angle = speed / radius * t + phase
    c, s = math.cos(angle) * radius, math.sin(angle) * radius
    e1, e2 = circle_basis(plane)
    return (center[0] + c * e1[0] + s * e2[0],
            center[1] + c * e1[1] + s * e2[1],
            center[2] + c * e1[2] + s * e2[2])


def process_heartbeats(records: list[FLSRecord], last_seen: dict[str, float],
                       now: float, hp: HeartbeatPolicy,
                       standby: list[FLSRecord]):
    """Detect silent illuminating drones and plan standby takeovers.

    A drone is declared failed after miss_limit consecutive silent periods;
    its target goes to the nearest available standby (ties to the lower id).
    Targets left over when the pool runs dry are returned as uncovered -
    degraded, not fatal.

    Returns:
        (failed records, [(standby_id, target)] takeovers, uncovered targets)
    """
    timeout = hp.miss_limit * hp.period
    failed = [r for r in sorted(records, key=lambda r: r.id)
              if r.role is Role.ILLUMINATING
              and now - last_seen.get(r.id, 0.0) > timeout]
    available = sorted((s for s in standby if s.role is Role.STANDBY),
                       key=lambda s: s.id)
    takeovers: list[tuple[str, Vec3]] = []
    uncovered: list[Vec3] = []
    for rec in failed:
        transition(rec, Role.FAILED)
        target = rec.target
        if target is None:
            continue
        if not available:
            uncovered.append(target)
            continue
        best = min(available,
                   key=lambda s: (vec.dist(s.kinematics.position, target), s.id))
        available.remove(best)
        takeovers.append((best.id, target))
    return failed, takeovers, uncovered


def charging_tick(fls: FLSRecord, policy: ChargingPolicy, dt: float,
                  travel_time_estimate: float,
                  arrival_radius: float = 0.05) -> FLSRecord:
    """Advance one drone's battery/role lifecycle by dt.

    Flying roles drain; an illuminating drone heads for the charger once its
    battery cannot cover the trip plus the reserve; a traveling drone docks
    on arrival; a docked drone recharges and rejoins the standby pool when
    full. Battery hitting zero airborne is a mid-air death (Failed).
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if fls.role in FLYING_ROLES:
        fls.battery = max(0.0, fls.battery - policy.drain_rate * dt)
        if fls.battery == 0.0:
            return transition(fls, Role.FAILED)
    if fls.role is Role.ILLUMINATING:
        if fls.battery < policy.reserve + travel_time_estimate:
            return transition(fls, Role.TO_CHARGER)
    elif fls.role is Role.TO_CHARGER:
        if vec.dist(fls.kinematics.position, policy.charger_position) <= arrival_radius:
            return transition(fls, Role.CHARGING)
    elif fls.role is Role.CHARGING:
        fls.battery = min(policy.full_battery, fls.battery + policy.recharge_rate * dt)
        if fls.battery >= policy.full_battery:
            return transition(fls, Role.STANDBY)
    return fls
