"""Point cloud ingestion, farthest-point downsampling, and set metrics.

Two text formats are accepted: XYZRGB (six whitespace-separated fields per
line, '#' comments) and ASCII PLY (header-declared vertex count, x/y/z
properties with optional red/green/blue). Clouds of tens of thousands of
points get downsampled to an affordable drone count by greedy
farthest-point sampling, which is fully deterministic: it starts from the
lexicographically smallest point and breaks distance ties by the lower
index, so a given (cloud, n) always yields the same subset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CountMismatch(Exception):
    pass


class EmptyCloud(Exception):
    pass


@dataclass
class PointCloud:
    points: np.ndarray                 # (n, 3) float
    colors: np.ndarray                 # (n, 3) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if len(self.points) == 0:
            raise EmptyCloud("point cloud has no points")
        if len(self.colors) != len(self.points):
            raise ValueError("one color per point required")
        if not np.isfinite(self.points).all():
            raise ValueError("coordinates must be finite")

    def __len__(self) -> int:
        return len(self.points)


def loads_xyzrgb(text: str) -> PointCloud:
    points, colors = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", lineno)
        try:
            x, y, z = (float(v) for v in fields[:3])
            r, g, b = (int(v) for v in fields[3:])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        points.append((x, y, z))
        colors.append((r, g, b))
    if not points:
        raise EmptyCloud("no points parsed")
    return PointCloud(np.array(points), np.array(colors))


def loads_ply(text: str) -> PointCloud:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1)
    count = None
    props: list[str] = []
    body_start = None
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if line.startswith("format"):
            if line.split() != ["format", "ascii", "1.0"]:
                raise ParseError("only 'format ascii 1.0' is supported", i)
        elif line.startswith("element vertex"):
            count = int(line.split()[2])
        elif line.startswith("element"):
            raise ParseError("only vertex elements are supported", i)
        elif line.startswith("property"):
            props.append(line.split()[-1])
        elif line == "end_header":
            body_start = i
            break
    if count is None or body_start is None:
        raise ParseError("header missing vertex count or end_header", 1)
    for axis in ("x", "y", "z"):
        if axis not in props:
            raise ParseError(f"missing '{axis}' property", 1)
    has_rgb = all(c in props for c in ("red", "green", "blue"))
    idx = {name: k for k, name in enumerate(props)}

    body = [l for l in (raw.strip() for raw in lines[body_start:]) if l]
    if len(body) != count:
        raise CountMismatch(f"header declares {count} vertices, body has {len(body)}")
    points, colors = [], []
    for off, line in enumerate(body):
        fields = line.split()
        lineno = body_start + 1 + off
        if len(fields) != len(props):
            raise ParseError(f"expected {len(props)} fields, got {len(fields)}", lineno)
        try:
            points.append(tuple(float(fields[idx[a]]) for a in ("x", "y", "z")))
            if has_rgb:
                colors.append(tuple(int(fields[idx[c]])
                                    for c in ("red", "green", "blue")))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    if not points:
        raise EmptyCloud("no points parsed")
    if not has_rgb:
        colors = [(255, 255, 255)] * len(points)
    return PointCloud(np.array(points), np.array(colors))


def load_pointcloud(path) -> PointCloud:
    """Parse a cloud file, sniffing PLY by its magic line."""
    text = Path(path).read_text()
    first = text.lstrip().splitlines()[0].strip() if text.strip() else ""
    if first == "ply":
        return loads_ply(text)
    return loads_xyzrgb(text)


def dumps_xyzrgb(cloud: PointCloud) -> str:
    """XYZRGB text that re-parses to the identical cloud (repr round-trip)."""
    out = []
    for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors):
        out.append(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}\n")
    return "".join(out)


def save_pointcloud(cloud: PointCloud, path) -> None:
    Path(path).write_text(dumps_xyzrgb(cloud))


def downsample(cloud: PointCloud, n: int, seed=None) -> PointCloud:
    """Greedy farthest-point subsample of n points.

    Deterministic regardless of seed (the argument is reserved for future
    randomized samplers): the first point is the lexicographic minimum of
    (x, y, z), every next point maximizes the distance to the chosen set,
    and ties go to the lower index. n >= len(cloud) returns the cloud as is.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n >= len(cloud):
        return cloud
    pts = cloud.points
    chosen = [int(np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))[0])]
    dists = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    while len(chosen) < n:
        nxt = int(np.argmax(dists))  # argmax takes the first (lowest) index on ties
        chosen.append(nxt)
        dists = np.minimum(dists, np.linalg.norm(pts - pts[nxt], axis=1))
    return PointCloud(pts[chosen], cloud.colors[chosen])


def directed_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """max over a of the distance to the nearest point of b."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(d.min(axis=1).max())


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance: the larger of both directed distances."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))
