"""Scenario configuration: one validated, seedable description of a run.

A scenario file is hierarchical YAML with the sections modeled below; the
same models back the service request bodies, so file and API share a single
schema. ConfigInvalid wraps every validation failure with a readable
message list.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from .dynamics import (
    CalibrationCurve,
    ControllerGains,
    DownwashParams,
    MotionLimits,
    default_calibration_curve,
)
from .localization import Anchor, RangingModel
from .pointcloud import PointCloud, load_pointcloud
from .swarm import APFParams, ChargingPolicy, CirclePlane, HeartbeatPolicy
from .transport import NetworkConfig


class ConfigInvalid(Exception):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class Mode(str, Enum):
    POINTCLOUD_RENDER = "pointcloud_render"
    CIRCLE_FORMATION = "circle_formation"
    HAPTIC_WALL_PRESS = "haptic_wall_press"


class DynamicsSection(BaseModel):
    gains: ControllerGains = ControllerGains()
    limits: MotionLimits = MotionLimits()
    curve: CalibrationCurve = Field(default_factory=default_calibration_curve)
    downwash: DownwashParams = DownwashParams()


class LocalizationSection(BaseModel):
    model: RangingModel = RangingModel()
    anchors: list[Anchor] = []
    epoch: float = Field(default=0.0, ge=0.0)  # seconds between fixes; 0 = off

    @model_validator(mode="after")
    def _enough_anchors(self):
        if self.epoch > 0.0 and len(self.anchors) < 4:
            raise ValueError("periodic localization needs at least 4 anchors")
        return self


class VolumeSection(BaseModel):
    """Display volume the swarm flies in; also the spawn region."""

    min: tuple[float, float, float] = (-2.0, -2.0, 0.0)
    max: tuple[float, float, float] = (2.0, 2.0, 4.0)

    @model_validator(mode="after")
    def _ordered(self):
        if any(hi <= lo for lo, hi in zip(self.min, self.max)):
            raise ValueError("volume max must exceed min on every axis")
        return self


class SwarmSection(BaseModel):
    illuminating: int = Field(default=20, ge=0)
    standby: int = Field(default=0, ge=0)
    apf: APFParams = APFParams()
    heartbeat: HeartbeatPolicy = HeartbeatPolicy()
    charging: ChargingPolicy = ChargingPolicy()
    volume: VolumeSection = VolumeSection()
    spawn_min_separation: float = Field(default=0.3, gt=0.0)
    initial_battery_stagger: float = Field(default=0.0, ge=0.0)


class HalfSpaceSpec(BaseModel):
    shape: Literal["halfspace"] = "halfspace"
    point: tuple[float, float, float]
    normal: tuple[float, float, float]
    stiffness: float | None = Field(default=None, gt=0.0)


class SphereSpec(BaseModel):
    shape: Literal["sphere"] = "sphere"
    center: tuple[float, float, float]
    radius: float = Field(gt=0.0)
    stiffness: float | None = Field(default=None, gt=0.0)


ObjectSpec = Union[HalfSpaceSpec, SphereSpec]


class PointcloudSection(BaseModel):
    path: str | None = None
    points: list[list[float]] | None = None  # rows of x y z [r g b]
    count: int = Field(default=20, ge=1)

    @model_validator(mode="after")
    def _source(self):
        if (self.path is None) == (self.points is None):
            raise ValueError("give exactly one of 'path' or inline 'points'")
        if self.points is not None:
            for i, row in enumerate(self.points):
                if len(row) not in (3, 6):
                    raise ValueError(f"points[{i}] must have 3 or 6 values")
        return self

    def load(self, base_dir: Path | None = None) -> PointCloud:
        if self.points is not None:
            pts = np.array([row[:3] for row in self.points], dtype=float)
            colors = np.array(
                [row[3:] if len(row) == 6 else (255, 255, 255)
                 for row in self.points], dtype=np.uint8)
            return PointCloud(pts, colors)
        path = Path(self.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigInvalid(f"point cloud file not found: {path}")
        return load_pointcloud(path)


class CircleSection(BaseModel):
    radius: float = Field(default=0.5, gt=0.0)
    speed: float = Field(default=1.0, gt=0.0)
    plane: CirclePlane = CirclePlane.XY
    center: tuple[float, float, float] = (0.0, 0.0, 1.0)


class ProbeSection(BaseModel):
    script: list[tuple[float, tuple[float, float, float]]]
    compliance: float = Field(default=0.01, ge=0.0)   # m/N
    touch_threshold: float = Field(default=0.005, gt=0.0)

    @model_validator(mode="after")
    def _times(self):
        times = [t for t, _ in self.script]
        if not times:
            raise ValueError("probe script needs at least one waypoint")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        return self


class FaultSpec(BaseModel):
    time: float = Field(ge=0.0)
    fls: int = Field(ge=0)


class ScenarioConfig(BaseModel):
    seed: int = Field(default=0, ge=0, lt=2**64)
    duration: float = Field(gt=0.0)
    dt: float = Field(default=0.01, gt=0.0)
    mode: Mode = Mode.POINTCLOUD_RENDER
    log_every: int = Field(default=1, ge=1)
    emit_event_trace: bool = False
    network: NetworkConfig = NetworkConfig()
    dynamics: DynamicsSection = DynamicsSection()
    localization: LocalizationSection = LocalizationSection()
    swarm: SwarmSection = SwarmSection()
    objects: list[ObjectSpec] = []
    pointcloud: PointcloudSection | None = None
    circle: CircleSection | None = None
    probe: ProbeSection | None = None
    faults: list[FaultSpec] = []

    @model_validator(mode="after")
    def _mode_requirements(self):
        if self.mode is Mode.POINTCLOUD_RENDER:
            if self.pointcloud is None:
                raise ValueError("pointcloud_render needs a 'pointcloud' section")
            if self.swarm.illuminating < 1:
                raise ValueError("pointcloud_render needs at least one drone")
            if self.swarm.illuminating < self.pointcloud.count:
                raise ValueError("need at least as many drones as targets")
        elif self.mode is Mode.CIRCLE_FORMATION:
            if self.circle is None:
                raise ValueError("circle_formation needs a 'circle' section")
            if self.swarm.illuminating < 1:
                raise ValueError("circle_formation needs at least one drone")
        elif self.mode is Mode.HAPTIC_WALL_PRESS:
            if self.probe is None:
                raise ValueError("haptic_wall_press needs a 'probe' section")
            if not any(isinstance(o, HalfSpaceSpec) for o in self.objects):
                raise ValueError("haptic_wall_press needs a halfspace object")
            if self.swarm.illuminating < 1:
                raise ValueError("haptic_wall_press needs at least one drone")
        self.faults = sorted(self.faults, key=lambda f: f.time)
        for f in self.faults:
            if f.fls >= self.swarm.illuminating + self.swarm.standby:
                raise ValueError(f"fault targets unknown drone index {f.fls}")
        return self


def scenario_from_dict(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        msgs = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}"
                for e in exc.errors()]
        raise ConfigInvalid(msgs) from exc


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a YAML scenario file."""
    p = Path(path)
    if not p.exists():
        raise ConfigInvalid(f"scenario file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario file must contain a mapping")
    return scenario_from_dict(data)
