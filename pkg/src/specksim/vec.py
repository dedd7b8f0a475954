"""Small 3-vector helpers over plain tuples.

The control loops run once per tick for every drone, so these stay
allocation-light instead of reaching for numpy on 3-element vectors.
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]

ZERO: Vec3 = (0.0, 0.0, 0.0)


def add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def norm_sq(a: Vec3) -> float:
    return a[0] * a[0] + a[1] * a[1] + a[2] * a[2]


def norm(a: Vec3) -> float:
    return math.sqrt(norm_sq(a))


def dist(a: Vec3, b: Vec3) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def unit(a: Vec3) -> Vec3:
    """Unit vector along a; raises ValueError on (near-)zero input."""
    n = norm(a)
    if n < 1e-15:
        raise ValueError("cannot normalize near-zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def clip_norm(a: Vec3, max_norm: float) -> Vec3:
    """Scale a down to max_norm if it is longer, otherwise return it unchanged."""
    n = norm(a)
    if n <= max_norm or n == 0.0:
        return a
    f = max_norm / n
    return (a[0] * f, a[1] * f, a[2] * f)


def lerp(a: Vec3, b: Vec3, t: float) -> Vec3:
    return (
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    )


def rotate_z(a: Vec3, angle: float) -> Vec3:
    c = math.cos(angle)
    s = math.sin(angle)
    return (a[0] * c - a[1] * s, a[0] * s + a[1] * c, a[2])


def rotate_x(a: Vec3, angle: float) -> Vec3:
    c = math.cos(angle)
    s = math.sin(angle)
    return (a[0], a[1] * c - a[2] * s, a[1] * s + a[2] * c)


def is_finite(a: Vec3) -> bool:
    return math.isfinite(a[0]) and math.isfinite(a[1]) and math.isfinite(a[2])
