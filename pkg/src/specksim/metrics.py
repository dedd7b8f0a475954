"""Run metrics computed from trajectory logs.

The trajectory log is line-delimited plain text, one record per (tick,
drone): ``time fls x y z vx vy vz role``. Everything here re-derives
metrics from that text so a stored log can be re-scored without re-running
the scenario; counters that only the live run knows (transport, uncovered
target time) are filled in by the engine afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pointcloud import hausdorff
from .swarm import CirclePlane, circle_waypoint

AIRBORNE_ROLES = {"illuminating", "to_charger"}


@dataclass
class RunMetrics:
    hausdorff: float | None = None
    mean_position_error: float | None = None
    collision_events: int = 0
    min_pairwise_distance: float | None = None
    uncovered_target_seconds: float = 0.0
    tracking_rms: float | None = None
    transport: dict = field(default_factory=dict)
    airborne_battery_deaths: int = 0
    assignment_method: str | None = None

    def to_dict(self) -> dict:
        return {
            "hausdorff": self.hausdorff,
            "mean_position_error": self.mean_position_error,
            "collision_events": self.collision_events,
            "min_pairwise_distance": self.min_pairwise_distance,
            "uncovered_target_seconds": self.uncovered_target_seconds,
            "tracking_rms": self.tracking_rms,
            "transport": self.transport,
            "airborne_battery_deaths": self.airborne_battery_deaths,
            "assignment_method": self.assignment_method,
        }


@dataclass
class Frame:
    time: float
    ids: list[str]
    positions: np.ndarray   # (n, 3)
    roles: list[str]


def parse_trajectory(text: str) -> list[Frame]:
    """Group trajectory records into per-time frames (input is time-ordered)."""
    frames: list[Frame] = []
    current: Frame | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 9:
            raise ValueError(f"trajectory line {lineno}: expected 9 fields")
        t = float(fields[0])
        pos = [float(fields[2]), float(fields[3]), float(fields[4])]
        if current is None or t != current.time:
            if current is not None:
                current.positions = np.array(current.positions)
                frames.append(current)
            current = Frame(t, [], [], [])
        current.ids.append(fields[1])
        current.positions.append(pos)
        current.roles.append(fields[8])
    if current is not None:
        current.positions = np.array(current.positions)
        frames.append(current)
    return frames


def _airborne(frame: Frame) -> tuple[list[str], np.ndarray]:
    keep = [i for i, role in enumerate(frame.roles) if role in AIRBORNE_ROLES]
    return [frame.ids[i] for i in keep], frame.positions[keep]


def collision_stats(frames: list[Frame], safety_radius: float):
    """(entering-collision events, minimum pairwise distance) over airborne drones.

    A contiguous stretch of ticks during which one pair stays below the
    safety radius counts as a single event for that pair.
    """
    events = 0
    min_dist = math.inf
    in_violation: set[tuple[str, str]] = set()
    for frame in frames:
        ids, pos = _airborne(frame)
        if len(ids) < 2:
            in_violation.clear()
            continue
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        iu = np.triu_indices(len(ids), k=1)
        pair_d = d[iu]
        min_dist = min(min_dist, float(pair_d.min()))
        now_violating = set()
        for a, b, dd in zip(iu[0], iu[1], pair_d):
            if dd < safety_radius:
                now_violating.add((ids[int(a)], ids[int(b)]))
        events += len(now_violating - in_violation)
        in_violation = now_violating
    return events, (None if math.isinf(min_dist) else min_dist)


def final_positions(frames: list[Frame]) -> np.ndarray:
    _, pos = _airborne(frames[-1])
    return pos


def tracking_rms(frames: list[Frame], radius: float, speed: float,
                 plane: CirclePlane, center, warmup: float) -> float | None:
    """RMS distance between each logged drone and its circular reference,
    skipping the warm-up interval. Drone k rides phase 2*pi*k/n."""
    samples = []
    n_drones = None
    for frame in frames:
        if frame.time < warmup:
            continue
        ids, pos = _airborne(frame)
        if not ids:
            continue
        if n_drones is None:
            n_drones = len(ids)
        for idx, fls_id in enumerate(sorted(ids)):
            k = ids.index(fls_id)
            phase = 2.0 * math.pi * idx / n_drones
            ref = circle_waypoint(radius, speed, plane, phase, frame.time, center)
            samples.append(float(np.linalg.norm(pos[k] - np.asarray(ref))))
    if not samples:
        return None
    return float(math.sqrt(np.mean(np.square(samples))))


def measure_period(frames: list[Frame], plane: CirclePlane, center,
                   fls_id: str, warmup: float) -> float | None:
    """Revolution period of one drone, from a linear fit to its unwrapped
    in-plane angle."""
    from .swarm import circle_basis

    e1, e2 = circle_basis(plane)
    times, angles = [], []
    for frame in frames:
        if frame.time < warmup or fls_id not in frame.ids:
            continue
        p = frame.positions[frame.ids.index(fls_id)] - np.asarray(center)
        times.append(frame.time)
        angles.append(math.atan2(float(p @ np.asarray(e2)), float(p @ np.asarray(e1))))
    if len(times) < 10:
        return None
    unwrapped = np.unwrap(angles)
    omega = float(np.polyfit(times, unwrapped, 1)[0])
    if omega == 0.0:
        return None
    return 2.0 * math.pi / abs(omega)


def compute_metrics(trajectory_log: str, targets: np.ndarray | None,
                    safety_radius: float, *, circle=None,
                    warmup: float = 0.0) -> RunMetrics:
    """Score a trajectory log.

    Args:
        trajectory_log: the run's trajectory text.
        targets: (n, 3) target points for render scenarios, or None.
        safety_radius: pairwise distance below which a collision is counted.
        circle: optional CircleSection-like object (radius/speed/plane/center)
            enabling tracking_rms.
        warmup: seconds excluded from tracking statistics.
    """
    frames = parse_trajectory(trajectory_log)
    if not frames:
        raise ValueError("empty trajectory log")
    metrics = RunMetrics()
    metrics.collision_events, metrics.min_pairwise_distance = collision_stats(
        frames, safety_radius)
    if targets is not None and len(targets):
        finals = final_positions(frames)
        if len(finals):
            metrics.hausdorff = hausdorff(finals, targets)
            d = np.linalg.norm(finals[:, None, :] - np.asarray(targets)[None, :, :],
                               axis=2)
            metrics.mean_position_error = float(d.min(axis=1).mean())
    if circle is not None:
        metrics.tracking_rms = tracking_rms(
            frames, circle.radius, circle.speed, circle.plane,
            circle.center, warmup)
    return metrics
