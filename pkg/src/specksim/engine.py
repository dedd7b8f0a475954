"""Scenario execution: builds the actor swarm, drives the deterministic
event loop, and emits logs and metrics.

Actor ids sort as fls000 < fls001 < ... < hand < hub, which fixes the
processing order within one tick instant: drones move first, then the
scripted hand reacts, then the hub coordinates. All coordination rides the
lossy datagram network (heartbeats, target assignments, charger releases);
only proximity sensing reads the shared stage directly, standing in for
onboard sensors.

Logs are plain text for diffability: a run is a pure function of
(config, seed) and repeat runs must be byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import vec
from .config import (
    ConfigInvalid,
    HalfSpaceSpec,
    Mode,
    ScenarioConfig,
    SphereSpec,
)
from .dynamics import (
    KinematicState,
    PositionController,
    downwash_accel,
    enforce_limits,
)
from .haptics import (
    HalfSpace,
    HandProbe,
    Sphere,
    classify_feedback,
    detect_touch,
    hand_probe_step,
    penetration,
    render_force,
)
from .localization import (
    AnchorSet,
    DegenerateGeometry,
    NoConvergence,
    OutOfRange,
    simulate_range,
    trilaterate,
)
from .metrics import RunMetrics, compute_metrics
from .pointcloud import downsample
from .runtime import Actor, Event, EventKind, Scheduler, trace_lines
from .swarm import (
    FLYING_ROLES,
    FLSRecord,
    Role,
    apf_velocity,
    assign_targets,
    charging_tick,
    circle_waypoint,
    process_heartbeats,
    reactive_avoid,
    transition,
)
from .transport import Network
from .vec import Vec3, ZERO

HUB_ID = "hub"
HAND_ID = "hand"


def fls_id(index: int) -> str:
    return f"fls{index:03d}"


def _msg(**kw) -> bytes:
    return json.dumps(kw, sort_keys=True, separators=(",", ":")).encode()


def _decode(payload: bytes) -> dict:
    return json.loads(payload.decode())


@dataclass
class RunResult:
    trajectory_log: str
    role_log: str
    metrics: RunMetrics
    haptics_log: str | None = None
    event_trace: str | None = None
    series: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class World:
    """Shared stage and log sinks.

    Each drone writes only its own kinematics; reads of other drones'
    positions model onboard proximity sensing, not network state.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.positions: dict[str, Vec3] = {}
        self.roles: dict[str, Role] = {}
        self.traj: list[str] = []
        self.role_log: list[str] = []
        self.haptics_log: list[str] = []
        self.series: dict[str, list[str]] = {}
        self.probe_pos: Vec3 = ZERO
        self.probe_vel: Vec3 = ZERO
        self.probe_force: Vec3 = ZERO
        self.uncovered_seconds = 0.0
        self.airborne_battery_deaths = 0
        self.assignment_method: str | None = None
        self.warnings: list[str] = []
        self.wall: HalfSpace | None = None
        lo = config.swarm.volume.min
        self.terminus_row = (lo[0], lo[1], 0.0)

    def log_traj(self, t: float, actor: str, state: KinematicState, role: str):
        p, v = state.position, state.velocity
        self.traj.append(
            f"{t:.6f} {actor} {p[0]:.6f} {p[1]:.6f} {p[2]:.6f} "
            f"{v[0]:.6f} {v[1]:.6f} {v[2]:.6f} {role}\n")

    def log_role(self, t: float, actor: str, old: str, new: str, reason: str):
        self.role_log.append(f"{t:.6f} {actor} {old} {new} {reason}\n")

    def log_series(self, name: str, line: str):
        self.series.setdefault(name, []).append(line)

    def airborne_neighbors(self, exclude: str) -> list[Vec3]:
        roles = self.roles
        return [p for a, p in self.positions.items()
                if a != exclude and roles.get(a) in FLYING_ROLES]

    def terminus_slot(self, actor: str) -> Vec3:
        x, y, z = self.terminus_row
        index = int(actor[3:]) if actor.startswith("fls") else 0
        return (x + 0.1 + 0.15 * index, y + 0.05, z)


class FlsActor(Actor):
    """One drone: periodic physics ticks plus heartbeat/localization timers."""

    states = frozenset(r.value for r in Role)

    def __init__(self, record: FLSRecord, config: ScenarioConfig, world: World,
                 hangar_slot: Vec3, loc_rng, total_ticks: int,
                 has_hub: bool, phase: float = 0.0):
        super().__init__(record.id, initial_state=record.role.value)
        self.record = record
        self.config = config
        self.world = world
        self.hangar_slot = hangar_slot
        self.loc_rng = loc_rng
        self.total_ticks = total_ticks
        self.has_hub = has_hub
        self.phase = phase
        self.tick_index = 0
        self.controller = PositionController(config.dynamics.gains)
        self._anchor_set = None
        world.positions[record.id] = record.kinematics.position
        world.roles[record.id] = record.role

    # -- event plumbing ---------------------------------------------------

    def handle(self, sched: Scheduler, event: Event) -> None:
        if event.kind is EventKind.TICK:
            self.on_tick(sched)
        elif event.kind is EventKind.MESSAGE:
            self.on_message(sched, _decode(event.datagram.payload))
        elif event.kind is EventKind.TIMER:
            if event.tag == "hb":
                self.send_heartbeat(sched)
            elif event.tag == "loc":
                self.take_position_fix(sched)

    def start(self, sched: Scheduler) -> None:
        sched.enqueue_event(Event(0.0, self.id, EventKind.TICK))
        if self.has_hub:
            sched.schedule_timer(self.id, self.config.swarm.heartbeat.period, "hb")
        loc = self.config.localization
        if loc.epoch > 0.0 and len(loc.anchors) >= 4:
            sched.schedule_timer(self.id, loc.epoch, "loc")

    def on_tick(self, sched: Scheduler) -> None:
        t = self.tick_index * self.config.dt
        if self.tick_index % self.config.log_every == 0 or \
                self.tick_index == self.total_ticks:
            self.world.log_traj(t, self.id, self.record.kinematics,
                                self.record.role.value)
        if self.tick_index >= self.total_ticks:
            return
        mode = self.config.mode
        if mode is Mode.POINTCLOUD_RENDER:
            self.step_render(sched, t)
        elif mode is Mode.CIRCLE_FORMATION:
            self.step_circle(sched, t)
        else:
            self.step_wall_press(sched, t)
        if sched.alive(self.id):
            self.tick_index += 1
            sched.enqueue_event(
                Event(self.tick_index * self.config.dt, self.id, EventKind.TICK))

    # -- mode behaviors --------------------------------------------------------

    def step_render(self, sched: Scheduler, t: float) -> None:
        rec = self.record
        dyn = self.config.dynamics
        dt = self.config.dt
        if rec.role in FLYING_ROLES or rec.role is Role.CHARGING:
            old_role = rec.role
            charging_tick(rec, self.config.swarm.charging, dt,
                          self.travel_time_estimate())
            if rec.role is not old_role:
                self.on_lifecycle_transition(sched, t, old_role)
                if rec.role is Role.FAILED:
                    return
        if rec.role not in FLYING_ROLES:
            return
        neighbors = self.world.airborne_neighbors(self.id)
        pos = rec.kinematics.position
        apf = self.config.swarm.apf
        if rec.role is Role.ILLUMINATING:
            v_cmd = apf_velocity(pos, rec.target, neighbors, apf)
        else:  # heading for the charger: decentralized straight-line + repulsion
            charger = self.config.swarm.charging.charger_position
            offset = vec.sub(charger, pos)
            d = vec.norm(offset)
            cruise = min(apf.v_max, apf.k_att * d)
            cmd = vec.scale(offset, cruise / d) if d > 1e-9 else ZERO
            illum = [p for a, p in self.world.positions.items()
                     if a != self.id
                     and self.world.roles.get(a) is Role.ILLUMINATING]
            v_cmd = reactive_avoid(cmd, pos, illum, apf)
        v = rec.kinematics.velocity
        a_cmd = ((v_cmd[0] - v[0]) / dt, (v_cmd[1] - v[1]) / dt,
                 (v_cmd[2] - v[2]) / dt)
        a_dw = downwash_accel(pos, neighbors, dyn.downwash, dyn.gains.mass)
        rec.kinematics, _ = enforce_limits(rec.kinematics, a_cmd, dyn.limits,
                                           dt, dyn.gains.mass, disturbance=a_dw)
        self.world.positions[self.id] = rec.kinematics.position

    def step_circle(self, sched: Scheduler, t: float) -> None:
        rec = self.record
        dyn = self.config.dynamics
        dt = self.config.dt
        circ = self.config.circle
        ref = circle_waypoint(circ.radius, circ.speed, circ.plane, self.phase,
                              t, circ.center)
        error = vec.sub(ref, rec.kinematics.position)
        force = self.controller.step(error, dt)
        mass = dyn.gains.mass
        accel = (force[0] / mass, force[1] / mass, force[2] / mass)
        neighbors = self.world.airborne_neighbors(self.id)
        a_dw = downwash_accel(rec.kinematics.position, neighbors, dyn.downwash,
                              mass)
        rec.kinematics, _ = enforce_limits(rec.kinematics, accel, dyn.limits,
                                           dt, mass, disturbance=a_dw)
        self.world.positions[self.id] = rec.kinematics.position
        self.world.log_series(
            "tracking_error",
            f"{t:.6f} {self.id} {vec.norm(error):.6f}\n")

    def step_wall_press(self, sched: Scheduler, t: float) -> None:
        rec = self.record
        world = self.world
        wall: HalfSpace = world.wall
        gains = self.config.dynamics.gains
        if wall.stiffness is not None:
            gains = gains.model_copy(update={"kp": wall.stiffness})
        report = penetration(wall, world.probe_pos)
        rate_in = -vec.dot(world.probe_vel, report.normal)
        force = render_force(report, rate_in, gains)
        world.probe_force = force
        # encountered-type: park on the surface under the hand, get shoved
        # inward by exactly the penetration depth while touching
        p = world.probe_pos
        s = vec.dot(vec.sub(p, wall.point), wall.normal)
        surface = vec.sub(p, vec.scale(wall.normal, s if s > 0.0 else 0.0))
        old_pos = rec.kinematics.position
        dt = self.config.dt
        velocity = vec.scale(vec.sub(surface, old_pos), 1.0 / dt)
        rec.kinematics = KinematicState(surface, velocity)
        world.positions[self.id] = surface
        displacement = vec.scale(report.normal, -report.depth)
        touched = detect_touch(report, displacement,
                               self.config.probe.touch_threshold)
        label = classify_feedback(force).value
        world.haptics_log.append(
            f"{t:.6f} {self.id} {report.depth:.6f} "
            f"{force[0]:.6f} {force[1]:.6f} {force[2]:.6f} {label} "
            f"{'touch' if touched else 'free'}\n")

    # -- lifecycle ----------------------------------------------------------

    def travel_time_estimate(self) -> float:
        """Conservative charger trip time: straight-line at v_max, doubled,
        plus a fixed docking margin."""
        charger = self.config.swarm.charging.charger_position
        d = vec.dist(self.record.kinematics.position, charger)
        return 2.0 * d / self.config.swarm.apf.v_max + 1.0

    def on_lifecycle_transition(self, sched: Scheduler, t: float,
                                old_role: Role) -> None:
        rec = self.record
        world = self.world
        self.set_state(rec.role.value)
        world.roles[self.id] = rec.role
        if rec.role is Role.TO_CHARGER:
            world.log_role(t, self.id, old_role.value, rec.role.value,
                           f"battery={rec.battery:.2f},"
                           f"travel_est={self.travel_time_estimate():.2f}")
            if self.has_hub and rec.target is not None:
                sched.send_message(self.id, HUB_ID, _msg(
                    type="release", id=self.id, target=list(rec.target)))
            rec.target = None
        elif rec.role is Role.CHARGING:
            world.log_role(t, self.id, old_role.value, rec.role.value, "docked")
            rec.kinematics = KinematicState(
                self.config.swarm.charging.charger_position, ZERO)
            world.positions[self.id] = rec.kinematics.position
        elif rec.role is Role.STANDBY:
            world.log_role(t, self.id, old_role.value, rec.role.value,
                           "recharged")
            rec.kinematics = KinematicState(self.hangar_slot, ZERO)
            world.positions[self.id] = rec.kinematics.position
        elif rec.role is Role.FAILED:
            world.airborne_battery_deaths += 1
            world.log_role(t, self.id, old_role.value, rec.role.value,
                           "battery_exhausted")
            rec.kinematics = KinematicState(world.terminus_slot(self.id), ZERO)
            world.positions[self.id] = rec.kinematics.position
            world.log_traj(t, self.id, rec.kinematics, rec.role.value)
            sched.kill(self.id, "battery")

    # -- messaging -----------------------------------------------------------

    def on_message(self, sched: Scheduler, msg: dict) -> None:
        if msg.get("type") != "assign":
            return
        rec = self.record
        target = tuple(msg["target"])
        if rec.role is Role.STANDBY:
            rec.target = target
            transition(rec, Role.ILLUMINATING)
            self.set_state(rec.role.value)
            self.world.roles[self.id] = rec.role
            self.world.log_role(sched.now, self.id, Role.STANDBY.value,
                                rec.role.value, "takeover")
        elif rec.role is Role.ILLUMINATING:
            rec.target = target

    def send_heartbeat(self, sched: Scheduler) -> None:
        rec = self.record
        sched.send_message(self.id, HUB_ID, _msg(
            type="hb", id=self.id,
            pos=list(rec.kinematics.position),
            battery=round(rec.battery, 6),
            role=rec.role.value,
            target=list(rec.target) if rec.target is not None else None))
        if self.config.mode is Mode.POINTCLOUD_RENDER:
            self.world.log_series(
                "battery",
                f"{sched.now:.6f} {self.id} {rec.battery:.3f} {rec.role.value}\n")
        sched.schedule_timer(self.id, self.config.swarm.heartbeat.period, "hb")

    def take_position_fix(self, sched: Scheduler) -> None:
        loc = self.config.localization
        if self._anchor_set is None:
            self._anchor_set = AnchorSet(anchors=loc.anchors)
        pos = self.record.kinematics.position
        try:
            ranges = [simulate_range(loc.model, vec.dist(pos, a.position),
                                     self.loc_rng)
                      for a in loc.anchors]
            estimate = trilaterate(self._anchor_set, ranges)
        except (OutOfRange, DegenerateGeometry, NoConvergence):
            self.world.log_series(
                "localization", f"{sched.now:.6f} {self.id} skipped\n")
        else:
            e = estimate.position
            err = vec.dist(e, pos)
            self.world.log_series(
                "localization",
                f"{sched.now:.6f} {self.id} {e[0]:.6f} {e[1]:.6f} {e[2]:.6f} "
                f"{err:.6f}\n")
        sched.schedule_timer(self.id, loc.epoch, "loc")


class HandActor(Actor):
    """Scripted quasi-static hand probing the haptic scene."""

    states = frozenset({"probing"})

    def __init__(self, config: ScenarioConfig, world: World, total_ticks: int):
        super().__init__(HAND_ID, initial_state="probing")
        self.config = config
        self.world = world
        self.total_ticks = total_ticks
        self.tick_index = 0
        script = [(t, tuple(p)) for t, p in config.probe.script]
        start = script[0][1]
        self.probe = HandProbe(position=start, script=script)
        world.probe_pos = start
        world.probe_vel = ZERO

    def handle(self, sched: Scheduler, event: Event) -> None:
        if event.kind is not EventKind.TICK:
            return
        t = self.tick_index * self.config.dt
        if self.tick_index % self.config.log_every == 0 or \
                self.tick_index == self.total_ticks:
            state = KinematicState(self.probe.position, self.probe.velocity)
            self.world.log_traj(t, self.id, state, "hand")
        if self.tick_index >= self.total_ticks:
            return
        self.probe = hand_probe_step(self.probe, self.world.probe_force,
                                     self.config.probe.compliance,
                                     self.config.dt)
        self.world.probe_pos = self.probe.position
        self.world.probe_vel = self.probe.velocity
        self.tick_index += 1
        sched.enqueue_event(
            Event(self.tick_index * self.config.dt, self.id, EventKind.TICK))

    def start(self, sched: Scheduler) -> None:
        sched.enqueue_event(Event(0.0, self.id, EventKind.TICK))


class HubActor(Actor):
    """Centralized coordinator: assignment, failure detection, takeovers.

    The hub's picture of the swarm comes entirely from heartbeats (plus the
    dispatch-time snapshot), so under heavy packet loss it can wrongly
    declare a live drone failed; that shows up as duplicate coverage in the
    metrics rather than an error.
    """

    states = frozenset({"coordinating"})

    def __init__(self, config: ScenarioConfig, world: World,
                 targets: list[Vec3], initial_view: dict[str, FLSRecord]):
        super().__init__(HUB_ID, initial_state="coordinating")
        self.config = config
        self.world = world
        self.targets = targets
        self.view = initial_view
        self.last_seen: dict[str, float] = {i: 0.0 for i in initial_view}
        self.assignee: dict[int, str | None] = {}

    def start(self, sched: Scheduler) -> None:
        sched.enqueue_event(Event(0.0, HUB_ID, EventKind.TIMER, tag="boot"))

    def handle(self, sched: Scheduler, event: Event) -> None:
        if event.kind is EventKind.TIMER:
            if event.tag == "boot":
                self.boot(sched)
            elif event.tag == "check":
                self.check(sched)
        elif event.kind is EventKind.MESSAGE:
            self.on_message(sched, _decode(event.datagram.payload))

    def boot(self, sched: Scheduler) -> None:
        illum = [i for i, r in self.view.items() if r.role is Role.ILLUMINATING]
        positions = [self.view[i].kinematics.position for i in illum]
        assignment = assign_targets(positions, self.targets)
        self.world.assignment_method = assignment.method
        if assignment.method != "optimal":
            self.world.warnings.append(
                "assignment used the greedy fallback (swarm larger than the "
                "exact-solver cutoff)")
        for f_idx, t_idx in sorted(assignment.mapping.items()):
            self.set_assignee(sched, t_idx, illum[f_idx])
        sched.schedule_timer(HUB_ID, self.config.swarm.heartbeat.period, "check")

    def check(self, sched: Scheduler) -> None:
        hp = self.config.swarm.heartbeat
        illuminating = [r for r in self.view.values()
                        if r.role is Role.ILLUMINATING]
        standby = [r for r in self.view.values() if r.role is Role.STANDBY]
        failed, takeovers, _ = process_heartbeats(
            illuminating, self.last_seen, sched.now, hp, standby)
        for rec in failed:
            self.world.roles[rec.id] = Role.FAILED
            self.world.log_role(sched.now, rec.id, Role.ILLUMINATING.value,
                                Role.FAILED.value, "heartbeat_timeout")
            # garbage collection: the conveyor deposits the wreck on the
            # terminus row
            state = KinematicState(self.world.terminus_slot(rec.id), ZERO)
            self.world.log_traj(sched.now, rec.id, state, Role.FAILED.value)
        for standby_id, target in takeovers:
            t_idx = self.target_index(target)
            if t_idx is not None:
                self.set_assignee(sched, t_idx, standby_id)
        self.heal_assignments(sched)
        uncovered = sum(1 for t_idx in range(len(self.targets))
                        if self.assignee.get(t_idx) is None)
        self.world.uncovered_seconds += uncovered * hp.period
        sched.schedule_timer(HUB_ID, hp.period, "check")

    def on_message(self, sched: Scheduler, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "hb":
            rec = self.view.get(msg["id"])
            if rec is None:
                return
            self.last_seen[msg["id"]] = sched.now
            if rec.role is not Role.FAILED:  # a failed verdict is final
                rec.kinematics = KinematicState(tuple(msg["pos"]), ZERO)
                rec.role = Role(msg["role"])
                rec.battery = msg["battery"]
                rec.target = tuple(msg["target"]) if msg["target"] else None
        elif kind == "release":
            t_idx = self.target_index(tuple(msg["target"]))
            if t_idx is None:
                return
            rec = self.view.get(msg["id"])
            if rec is not None and rec.role is Role.ILLUMINATING:
                rec.role = Role.TO_CHARGER
                rec.target = None
            self.assignee[t_idx] = None
            self.cover_target(sched, t_idx)

    # -- helpers -----------------------------------------------------------

    def target_index(self, target: tuple) -> int | None:
        for i, t in enumerate(self.targets):
            if vec.dist(t, target) < 1e-9 and self.assignee.get(i) is not None:
                return i
        return None

    def set_assignee(self, sched: Scheduler, t_idx: int, actor: str) -> None:
        self.assignee[t_idx] = actor
        rec = self.view[actor]
        if rec.role is Role.STANDBY:
            rec.role = Role.ILLUMINATING
        rec.target = self.targets[t_idx]
        sched.send_message(HUB_ID, actor,
                           _msg(type="assign", target=list(self.targets[t_idx])))

    def cover_target(self, sched: Scheduler, t_idx: int) -> bool:
        target = self.targets[t_idx]
        standby = sorted((r for r in self.view.values()
                          if r.role is Role.STANDBY), key=lambda r: r.id)
        if not standby:
            self.assignee[t_idx] = None
            return False
        best = min(standby,
                   key=lambda r: (vec.dist(r.kinematics.position, target), r.id))
        self.set_assignee(sched, t_idx, best.id)
        return True

    def heal_assignments(self, sched: Scheduler) -> None:
        """Re-send lost assignments and refill targets whose assignee is gone."""
        for t_idx in range(len(self.targets)):
            actor = self.assignee.get(t_idx)
            if actor is None:
                self.cover_target(sched, t_idx)
                continue
            rec = self.view.get(actor)
            if rec is None or rec.role in (Role.FAILED, Role.TO_CHARGER,
                                           Role.CHARGING):
                # dead, or abandoned the target for the charger and the
                # release datagram never arrived
                self.assignee[t_idx] = None
                self.cover_target(sched, t_idx)
            elif rec.role is Role.STANDBY or (
                    rec.role is Role.ILLUMINATING and (
                        rec.target is None
                        or vec.dist(rec.target, self.targets[t_idx]) > 1e-9)):
                # the assign datagram was lost; heartbeats still show the old
                # state, so repeat it
                sched.send_message(HUB_ID, actor, _msg(
                    type="assign", target=list(self.targets[t_idx])))


# -- run construction ---------------------------------------------------------


def _spawn_positions(config: ScenarioConfig, rng) -> list[Vec3]:
    """Seeded random airborne spawn points with a minimum separation."""
    lo = config.swarm.volume.min
    hi = config.swarm.volume.max
    margin = 0.2
    sep = config.swarm.spawn_min_separation
    out: list[Vec3] = []
    attempts = 0
    while len(out) < config.swarm.illuminating:
        p = tuple(float(rng.uniform(lo[i] + margin, hi[i] - margin))
                  for i in range(3))
        p = (p[0], p[1], max(p[2], lo[2] + 0.3))
        if all(vec.dist(p, q) >= sep for q in out):
            out.append(p)
        attempts += 1
        if attempts > 100_000:
            raise ConfigInvalid(
                "could not place spawn points with the requested separation")
    return out


def _hangar_slots(config: ScenarioConfig, count: int) -> list[Vec3]:
    lo = config.swarm.volume.min
    hi = config.swarm.volume.max
    slots = []
    per_row = max(1, int((hi[0] - lo[0] - 0.4) / 0.3))
    for k in range(count):
        row, col = divmod(k, per_row)
        slots.append((lo[0] + 0.2 + 0.3 * col, lo[1] + 0.15 + 0.3 * row, 0.0))
    return slots


def _build_objects(config: ScenarioConfig):
    objects = []
    for spec in config.objects:
        if isinstance(spec, HalfSpaceSpec):
            objects.append(HalfSpace(spec.point, spec.normal, spec.stiffness))
        elif isinstance(spec, SphereSpec):
            objects.append(Sphere(spec.center, spec.radius, spec.stiffness))
    return objects


def run(config: ScenarioConfig, base_dir=None) -> RunResult:
    """Execute one scenario to completion.

    Deterministic: the logs and metrics are a pure function of the config
    (including its seed). Raises ConfigInvalid for anything a validator
    could not see statically (missing cloud file, empty cloud, ...).
    """
    seed_seq = np.random.SeedSequence(config.seed)
    n_fls = config.swarm.illuminating + config.swarm.standby
    children = seed_seq.spawn(2 + n_fls)
    net_rng = np.random.default_rng(children[0])
    spawn_rng = np.random.default_rng(children[1])

    total_ticks = int(round(config.duration / config.dt))
    world = World(config)
    network = Network(config.network, rng=net_rng)
    spawn_cap = max(64, 2 * (n_fls + 2) + 16)
    sched = Scheduler(network=network, spawn_cap=spawn_cap,
                      trace=config.emit_event_trace)

    def on_kill(actor_id, time, reason):
        world.roles[actor_id] = Role.FAILED

    sched.on_kill = on_kill

    mode = config.mode
    actors: list[Actor] = []
    targets: list[Vec3] = []

    if mode is Mode.POINTCLOUD_RENDER:
        cloud = config.pointcloud.load(base_dir)
        picked = downsample(cloud, config.pointcloud.count)
        targets = [tuple(float(v) for v in p) for p in picked.points]
        spawn = _spawn_positions(config, spawn_rng)
        hangar = _hangar_slots(config, config.swarm.standby)
        stagger = config.swarm.initial_battery_stagger
        full = config.swarm.charging.full_battery
        reserve = config.swarm.charging.reserve
        # staggered starting charge keeps recharge trips from synchronizing,
        # never dipping into the reserve-plus-trip band
        span = max(full - reserve - 30.0, 1.0)
        for i in range(config.swarm.illuminating):
            battery = full - (stagger * i) % span if stagger > 0.0 else full
            rec = FLSRecord(fls_id(i), KinematicState(spawn[i]),
                            Role.ILLUMINATING, battery, spawn[i])
            actors.append(FlsActor(rec, config, world, hangar[0] if hangar
                                   else (0.0, 0.0, 0.0),
                                   np.random.default_rng(children[2 + i]),
                                   total_ticks, has_hub=True))
        for j in range(config.swarm.standby):
            i = config.swarm.illuminating + j
            rec = FLSRecord(fls_id(i), KinematicState(hangar[j]),
                            Role.STANDBY, full, None)
            actors.append(FlsActor(rec, config, world, hangar[j],
                                   np.random.default_rng(children[2 + i]),
                                   total_ticks, has_hub=True))
        view = {a.id: FLSRecord(a.id, KinematicState(a.record.kinematics.position),
                                a.record.role, a.record.battery, a.record.target)
                for a in actors if isinstance(a, FlsActor)}
        hub = HubActor(config, world, targets, view)
        actors.append(hub)
    elif mode is Mode.CIRCLE_FORMATION:
        n = config.swarm.illuminating
        circ = config.circle
        for i in range(n):
            phase = 2.0 * math.pi * i / n
            start = circle_waypoint(circ.radius, circ.speed, circ.plane,
                                    phase, 0.0, circ.center)
            rec = FLSRecord(fls_id(i), KinematicState(start),
                            Role.ILLUMINATING,
                            config.swarm.charging.full_battery, start)
            actors.append(FlsActor(rec, config, world, (0.0, 0.0, 0.0),
                                   np.random.default_rng(children[2 + i]),
                                   total_ticks, has_hub=False, phase=phase))
    else:  # haptic wall press
        objects = _build_objects(config)
        world.wall = next(o for o in objects if isinstance(o, HalfSpace))
        script0 = tuple(config.probe.script[0][1])
        s = vec.dot(vec.sub(script0, world.wall.point), world.wall.normal)
        surface = vec.sub(script0, vec.scale(world.wall.normal, max(s, 0.0)))
        rec = FLSRecord(fls_id(0), KinematicState(surface), Role.ILLUMINATING,
                        config.swarm.charging.full_battery, surface)
        actors.append(FlsActor(rec, config, world, (0.0, 0.0, 0.0),
                               np.random.default_rng(children[2]),
                               total_ticks, has_hub=False))
        actors.append(HandActor(config, world, total_ticks))

    for actor in actors:
        sched.register(actor)
    for actor in actors:
        actor.start(sched)
    for fault in config.faults:
        sched.inject_fault(fls_id(fault.fls), fault.time)

    sched.advance(config.duration)

    trajectory = "".join(world.traj)
    warmup = 0.0
    circle = None
    if mode is Mode.CIRCLE_FORMATION:
        circle = config.circle
        warmup = 2.0 * math.pi * circle.radius / circle.speed
    metrics = compute_metrics(
        trajectory,
        np.array(targets) if targets else None,
        config.swarm.apf.safety_radius,
        circle=circle,
        warmup=warmup,
    )
    metrics.transport = network.stats().to_dict()
    metrics.uncovered_target_seconds = world.uncovered_seconds
    metrics.airborne_battery_deaths = world.airborne_battery_deaths
    metrics.assignment_method = world.assignment_method

    return RunResult(
        trajectory_log=trajectory,
        role_log="".join(world.role_log),
        metrics=metrics,
        haptics_log="".join(world.haptics_log) if world.haptics_log else None,
        event_trace=trace_lines(sched.trace) if sched.trace is not None else None,
        series={k: "".join(v) for k, v in world.series.items()},
        warnings=list(world.warnings),
    )
