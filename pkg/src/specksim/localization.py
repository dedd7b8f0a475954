"""Ranging-based localization: sensor error model, anchor multilateration,
and the decentralized distance+angle correction step.

The ranging model is additive Gaussian noise plus a bias that grows with
distance from the sensor's calibration point, signed toward overestimation.
Defaults keep the mean absolute error near 1 m inside the 5-15 cm band such
sensors are known for, while small (centimeter) distances show the very
large percentage errors seen in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .vec import Vec3


class OutOfRange(Exception):
    pass


class DegenerateGeometry(Exception):
    pass


class NoConvergence(Exception):
    pass


class RangingModel(BaseModel):
    """Additive error model for a distance sensor.

    measured = true + bias_slope * |true - calib_distance| + N(0, sigma^2),
    clamped at zero.
    """

    sigma: float = Field(default=0.05, ge=0.0)
    calib_distance: float = Field(default=0.1, ge=0.0)
    bias_slope: float = Field(default=0.05, ge=0.0)
    min_range: float = Field(default=0.0, ge=0.0)
    max_range: float = Field(default=10.0, gt=0.0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.min_range >= self.max_range:
            raise ValueError("min_range must be < max_range")
        return self


class Anchor(BaseModel):
    id: str
    position: tuple[float, float, float]


class AnchorSet(BaseModel):
    """Fixed ranging nodes at known positions; 3D solving needs >= 4."""

    anchors: list[Anchor] = Field(min_length=4)

    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.anchors], dtype=float)


@dataclass
class PositionEstimate:
    position: Vec3
    residual_rms: float
    iterations: int


@dataclass
class PolarObservation:
    """Distance and horizontal-plane bearing from an observer to an anchor drone."""

    distance: float
    bearing: float  # radians in [-pi, pi]

    def __post_init__(self):
        if self.distance < 0.0:
            raise ValueError("distance must be >= 0")

    def planar(self) -> Vec3:
        return (self.distance * math.cos(self.bearing),
                self.distance * math.sin(self.bearing),
                0.0)


def simulate_range(model: RangingModel, true_distance: float, rng) -> float:
    """One noisy range measurement of true_distance."""
    if not model.min_range <= true_distance <= model.max_range:
        raise OutOfRange(
            f"{true_distance} outside [{model.min_range}, {model.max_range}]")
    bias = model.bias_slope * abs(true_distance - model.calib_distance)
    noise = float(rng.normal(0.0, model.sigma)) if model.sigma > 0.0 else 0.0
    return max(0.0, true_distance + bias + noise)


def _closed_form_guess(positions: np.ndarray, ranges: np.ndarray) -> np.ndarray | None:
    """Linearized solve (differences of squared range equations); used only
    to seed the iteration when the system is over-determined."""
    a0, d0 = positions[0], ranges[0]
    a = 2.0 * (positions[1:] - a0)
    b = (np.sum(positions[1:] ** 2, axis=1) - np.sum(a0 ** 2)
         - ranges[1:] ** 2 + d0 ** 2)
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    return sol if rank == 3 else None


def trilaterate(anchors: AnchorSet, ranges, initial_guess=None) -> PositionEstimate:
    """Least-squares position from ranges to known anchors.

    Gauss-Newton on the residuals r_i = |p - a_i| - d_i, started from the
    closed-form linearization when five or more anchors are available
    (anchor centroid otherwise), stopping when the step drops below 1e-9 m.

    Args:
        anchors: anchor set (>= 4, not all coplanar).
        ranges: measured distances, one per anchor.
        initial_guess: optional starting point overriding the default.

    Returns:
        PositionEstimate with the solution, residual RMS, and iteration count.

    Raises:
        DegenerateGeometry: coplanar anchors or singular normal equations.
        NoConvergence: step never dropped below 1e-9 within 100 iterations.
    """
    positions = anchors.positions()
    d = np.asarray(ranges, dtype=float)
    if len(d) != len(positions):
        raise ValueError("need exactly one range per anchor")
    if len(positions) < 4:
        raise DegenerateGeometry("3D multilateration needs >= 4 anchors")
    centered = positions - positions.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9) < 3:
        raise DegenerateGeometry("anchors are coplanar")

    if initial_guess is not None:
        p = np.asarray(initial_guess, dtype=float)
    else:
        p = None
        if len(positions) >= 5:
            p = _closed_form_guess(positions, d)
        if p is None:
            p = positions.mean(axis=0)

    for iteration in range(1, 101):
        diff = p - positions
        dist = np.linalg.norm(diff, axis=1)
        dist = np.maximum(dist, 1e-12)
        residual = dist - d
        jac = diff / dist[:, None]
        jtj = jac.T @ jac
        try:
            step = np.linalg.solve(jtj, -jac.T @ residual)
        except np.linalg.LinAlgError as exc:
            raise DegenerateGeometry("singular normal equations") from exc
        p = p + step
        if float(np.linalg.norm(step)) < 1e-9:
            diff = p - positions
            residual = np.linalg.norm(diff, axis=1) - d
            rms = float(np.sqrt(np.mean(residual ** 2)))
            return PositionEstimate(tuple(float(v) for v in p), rms, iteration)
    raise NoConvergence("no convergence within 100 iterations")


def relative_localize_step(observed: PolarObservation,
                           desired: PolarObservation) -> Vec3:
    """Correction moving the observer so the anchor appears at the desired
    polar coordinates; applying it once with exact observations suffices."""
    ov = observed.planar()
    dv = desired.planar()
    return (ov[0] - dv[0], ov[1] - dv[1], 0.0)
