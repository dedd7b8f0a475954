"""Encountered-type haptic rendering against virtual objects.

A drone meets the user's hand at the surface of a virtual object and pushes
back with a force proportional to how far the hand has penetrated and how
fast it is pushing in. Only inward velocity contributes damping, so the
object never sucks the hand in on withdrawal. Multiple drones amplify force
either in parallel (several simultaneous contacts, forces add vectorially)
or in series (one contact, a pushing chain sharing a single displacement).

Pure functions over value types throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import vec
from .dynamics import ControllerGains
from .vec import Vec3, ZERO

TACTILE_THRESHOLD_N = 1.0  # at or above this magnitude the muscles feel it


class WrongMode(Exception):
    pass


class InconsistentDisplacement(Exception):
    pass


class DegenerateMesh(Exception):
    pass


@dataclass
class HalfSpace:
    """Solid filling everything behind the plane (opposite the outward normal)."""

    point: Vec3
    normal: Vec3
    stiffness: float | None = None  # overrides kp when set

    def __post_init__(self):
        self.normal = vec.unit(self.normal)


@dataclass
class Sphere:
    center: Vec3
    radius: float
    stiffness: float | None = None

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be > 0")


@dataclass
class ConvexMesh:
    """Closed convex triangle mesh; inside tests rely on convexity."""

    vertices: np.ndarray          # (n, 3)
    faces: list[tuple[int, int, int]]
    stiffness: float | None = None
    _normals: np.ndarray = field(init=False, repr=False)
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or len(self.faces) < 4:
            raise DegenerateMesh("need (n,3) vertices and at least 4 faces")
        normals, offsets = [], []
        for i, j, k in self.faces:
            a, b, c = verts[i], verts[j], verts[k]
            n = np.cross(b - a, c - a)
            area2 = np.linalg.norm(n)
            if area2 < 1e-12:
                raise DegenerateMesh("zero-area face")
            n = n / area2
            # convexity == every face plane has all vertices on one side;
            # the empty side is outward
            signed = (verts - a) @ n
            if signed.max() > 1e-9 and signed.min() < -1e-9:
                raise DegenerateMesh("mesh is not convex")
            if signed.max() > 1e-9:
                n = -n
            normals.append(n)
            offsets.append(np.dot(n, a))
        self._normals = np.array(normals)
        self._offsets = np.array(offsets)
        self.vertices = verts


VirtualObject = HalfSpace | Sphere | ConvexMesh


class Feedback(Enum):
    TACTILE = "tactile"
    KINESTHETIC = "kinesthetic"


class ChainMode(Enum):
    PARALLEL = "parallel"
    SERIES = "series"


@dataclass
class ContactReport:
    depth: float
    normal: Vec3      # outward unit normal at the nearest surface point
    touching: bool


@dataclass
class ChainMember:
    fls_id: str
    displacement: Vec3
    displacement_rate: Vec3
    gains: ControllerGains


@dataclass
class ContactChain:
    mode: ChainMode
    members: list[ChainMember]


@dataclass
class HandProbe:
    """Quasi-static hand following scripted waypoints, pushed by reaction force."""

    position: Vec3
    velocity: Vec3 = ZERO
    script: list[tuple[float, Vec3]] = field(default_factory=list)
    t: float = 0.0

    def __post_init__(self):
        times = [t for t, _ in self.script]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")


def penetration(obj: VirtualObject, p: Vec3) -> ContactReport:
    """Signed penetration of point p into obj (0 when outside).

    The normal always points out of the object, toward free space.
    """
    if not vec.is_finite(p):
        raise ValueError("query point must be finite")
    if isinstance(obj, HalfSpace):
        s = vec.dot(vec.sub(p, obj.point), obj.normal)
        depth = max(0.0, -s)
        return ContactReport(depth, obj.normal, depth > 0.0)
    if isinstance(obj, Sphere):
        offset = vec.sub(p, obj.center)
        r = vec.norm(offset)
        depth = max(0.0, obj.radius - r)
        normal = (0.0, 0.0, 1.0) if r < 1e-12 else vec.scale(offset, 1.0 / r)
        return ContactReport(depth, normal, depth > 0.0)
    if isinstance(obj, ConvexMesh):
        signed = obj._normals @ np.asarray(p) - obj._offsets
        # the least-penetrated face is both the exit direction and, when
        # outside, the separating plane
        worst = int(np.argmax(signed))
        depth = max(0.0, float(-signed[worst]))
        return ContactReport(depth, tuple(obj._normals[worst]), depth > 0.0)
    raise TypeError(f"unsupported object {type(obj).__name__}")


def render_force(report: ContactReport, rate_into_surface: float,
                 gains: ControllerGains) -> Vec3:
    """Contact force along the outward normal: kp*depth + kd*max(rate_in, 0).

    Zero when not touching; never pulls the hand into the object.
    """
    if not report.touching:
        return ZERO
    magnitude = gains.kp * report.depth + gains.kd * max(rate_into_surface, 0.0)
    return vec.scale(report.normal, magnitude)


def combine_parallel(chain: ContactChain) -> Vec3:
    """Vector sum of per-member forces, each from its own displacement."""
    if chain.mode is not ChainMode.PARALLEL:
        raise WrongMode("expected a parallel chain")
    total = ZERO
    for m in chain.members:
        f = vec.add(vec.scale(m.displacement, m.gains.kp),
                    vec.scale(m.displacement_rate, m.gains.kd))
        total = vec.add(total, f)
    return total


def combine_series(chain: ContactChain) -> Vec3:
    """(sum kp_i)*d + (sum kd_i)*d_rate for the shared displacement d."""
    if chain.mode is not ChainMode.SERIES:
        raise WrongMode("expected a series chain")
    if not chain.members:
        return ZERO
    d = chain.members[0].displacement
    rate = chain.members[0].displacement_rate
    for m in chain.members[1:]:
        if vec.dist(m.displacement, d) > 1e-9:
            raise InconsistentDisplacement(
                "series members must share one displacement")
    kp = sum(m.gains.kp for m in chain.members)
    kd = sum(m.gains.kd for m in chain.members)
    return vec.add(vec.scale(d, kp), vec.scale(rate, kd))


def classify_feedback(force: Vec3) -> Feedback:
    """Below 1 N the skin feels it (tactile); at or above, the muscles do."""
    if not vec.is_finite(force):
        raise ValueError("force must be finite")
    if vec.norm(force) < TACTILE_THRESHOLD_N:
        return Feedback.TACTILE
    return Feedback.KINESTHETIC


def detect_touch(report: ContactReport, fls_displacement: Vec3,
                 threshold: float) -> bool:
    """Presence-of-touch from how far the drone is shoved off its setpoint.

    Displacement is the proxy because force control is open loop; the
    geometric report is accepted for context but the decision is strictly
    |displacement| > threshold.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be > 0")
    return vec.norm(fls_displacement) > threshold


def scripted_position(script: list[tuple[float, Vec3]], t: float) -> Vec3:
    """Linear interpolation along the waypoint script, clamped at both ends."""
    if not script:
        raise ValueError("empty script")
    if t <= script[0][0]:
        return script[0][1]
    for (t0, p0), (t1, p1) in zip(script, script[1:]):
        if t <= t1:
            return vec.lerp(p0, p1, (t - t0) / (t1 - t0))
    return script[-1][1]


def hand_probe_step(probe: HandProbe, reaction_force: Vec3, compliance: float,
                    dt: float) -> HandProbe:
    """Advance the quasi-static hand one step.

    The hand tracks its scripted waypoint target and is displaced by
    compliance * reaction_force; there is no hand inertia. The reported
    velocity is the scripted push rate only - the compliance offset is an
    equilibrium displacement and carries no momentum, so it must not feed
    any damping term (doing so destabilizes the contact loop).
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    t = probe.t + dt
    if probe.script:
        prev_target = scripted_position(probe.script, probe.t)
        target = scripted_position(probe.script, t)
    else:
        prev_target = target = probe.position
    position = vec.add(target, vec.scale(reaction_force, compliance))
    velocity = vec.scale(vec.sub(target, prev_target), 1.0 / dt)
    return HandProbe(position, velocity, probe.script, t)
