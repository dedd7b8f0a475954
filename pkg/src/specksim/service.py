"""HTTP front end for the emulator.

Scenario execution, validation, point-cloud downsampling, and log scoring
are exposed as JSON endpoints so several experimenters can share one
emulator instance. Runs are synchronous: the response carries the logs and
metrics for the submitted scenario, and determinism is preserved because
the engine derives everything from the request body.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigInvalid, ScenarioConfig, scenario_from_dict
from .engine import run
from .metrics import compute_metrics
from .pointcloud import EmptyCloud, PointCloud, downsample

app = FastAPI(
    title="specksim",
    description="Deterministic desk-scale emulator for light-speck drone swarms",
    version=__version__,
)


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    scenario: dict
    seed: int | None = Field(default=None, ge=0, lt=2**64)


class RunResponse(BaseModel):
    metrics: dict
    trajectory_log: str
    role_log: str
    haptics_log: str | None = None
    event_trace: str | None = None
    series: dict[str, str] = {}
    warnings: list[str] = []


class ValidateRequest(BaseModel):
    scenario: dict


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str] = []


class DownsampleRequest(BaseModel):
    points: list[list[float]]   # rows of x y z [r g b]
    count: int = Field(ge=1)


class DownsampleResponse(BaseModel):
    points: list[list[float]]   # rows of x y z r g b


class MetricsRequest(BaseModel):
    trajectory_log: str
    scenario: dict


class MetricsResponse(BaseModel):
    metrics: dict


def _parse_scenario(data: dict, seed: int | None = None) -> ScenarioConfig:
    if seed is not None:
        data = dict(data)
        data["seed"] = seed
    try:
        return scenario_from_dict(data)
    except ConfigInvalid as exc:
        raise HTTPException(status_code=400, detail=exc.errors) from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/runs", response_model=RunResponse)
def execute_run(request: RunRequest) -> RunResponse:
    config = _parse_scenario(request.scenario, request.seed)
    try:
        result = run(config)
    except ConfigInvalid as exc:
        raise HTTPException(status_code=400, detail=exc.errors) from exc
    return RunResponse(
        metrics=result.metrics.to_dict(),
        trajectory_log=result.trajectory_log,
        role_log=result.role_log,
        haptics_log=result.haptics_log,
        event_trace=result.event_trace,
        series=result.series,
        warnings=result.warnings,
    )


@app.post("/validate", response_model=ValidateResponse)
def validate(request: ValidateRequest) -> ValidateResponse:
    try:
        scenario_from_dict(request.scenario)
    except ConfigInvalid as exc:
        return ValidateResponse(valid=False, errors=exc.errors)
    return ValidateResponse(valid=True)


@app.post("/downsample", response_model=DownsampleResponse)
def downsample_points(request: DownsampleRequest) -> DownsampleResponse:
    rows = request.points
    for i, row in enumerate(rows):
        if len(row) not in (3, 6):
            raise HTTPException(
                status_code=400, detail=[f"points[{i}] must have 3 or 6 values"])
    try:
        cloud = PointCloud(
            np.array([r[:3] for r in rows], dtype=float),
            np.array([r[3:] if len(r) == 6 else (255, 255, 255) for r in rows],
                     dtype=np.uint8))
    except (EmptyCloud, ValueError) as exc:
        raise HTTPException(status_code=400, detail=[str(exc)]) from exc
    picked = downsample(cloud, request.count)
    out = [[float(x), float(y), float(z), int(r), int(g), int(b)]
           for (x, y, z), (r, g, b) in zip(picked.points, picked.colors)]
    return DownsampleResponse(points=out)


@app.post("/metrics", response_model=MetricsResponse)
def score_log(request: MetricsRequest) -> MetricsResponse:
    config = _parse_scenario(request.scenario)
    targets = None
    if config.pointcloud is not None:
        cloud = config.pointcloud.load()
        targets = downsample(cloud, config.pointcloud.count).points
    warmup = 0.0
    if config.circle is not None:
        warmup = 2.0 * math.pi * config.circle.radius / config.circle.speed
    try:
        metrics = compute_metrics(
            request.trajectory_log,
            np.asarray(targets) if targets is not None else None,
            config.swarm.apf.safety_radius,
            circle=config.circle,
            warmup=warmup,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=[str(exc)]) from exc
    return MetricsResponse(metrics=metrics.to_dict())
