"""Static maze environments: walls, targets, start poses, geometric queries.

A maze is an immutable arena of zero-thickness wall segments with target
points the robot should touch and the poses it may start from. Coordinates
are centimeters; headings are radians from the +x axis, counter-clockwise.
Maze files are JSON with keys `name`, `bounds`, `walls`, `targets`, `starts`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import _kernels

BOUNDARY_PROBE_RAYS = 16
PROBE_STEP = 2.0 * math.pi / BOUNDARY_PROBE_RAYS


class MazeError(ValueError):
    """Malformed or invalid maze definition."""


@dataclass(frozen=True)
class Pose:
    """Robot pose: position in cm, heading in (-pi, pi]."""

    x: float
    y: float
    heading: float = 0.0

    def as_tuple(self):
        return (self.x, self.y, self.heading)


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]; angles already in range pass through unchanged."""
    if -math.pi < a <= math.pi:
        return a
    return float(_kernels.norm_angle(a))


@dataclass(frozen=True, eq=False)
class MazeSpec:
    """Immutable arena: walls (n, 4), targets (m, 2), start poses, bounds.

    Safe for unrestricted concurrent reads; all query functions are pure.
    """

    name: str
    bounds: tuple  # (xmin, ymin, xmax, ymax)
    walls: np.ndarray
    targets: np.ndarray
    starts: tuple

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)


def _as_wall_array(walls) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(walls, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise MazeError(f"walls must be an (n, 4) array, got shape {arr.shape}")
    return arr


def make_maze(name, bounds, walls, targets, starts) -> MazeSpec:
    """Assemble and validate a MazeSpec from plain sequences."""
    walls = _as_wall_array(walls)
    targets = np.ascontiguousarray(np.asarray(targets, dtype=np.float64))
    if targets.ndim != 2 or targets.shape[1] != 2:
        raise MazeError(f"targets must be an (n, 2) array, got shape {targets.shape}")
    poses = tuple(
        s if isinstance(s, Pose) else Pose(float(s[0]), float(s[1]), normalize_angle(float(s[2])))
        for s in starts
    )
    maze = MazeSpec(str(name), tuple(float(b) for b in bounds), walls, targets, poses)
    validate_maze(maze)
    return maze


def validate_maze(maze: MazeSpec) -> None:
    """Raise MazeError unless all maze invariants hold."""
    xmin, ymin, xmax, ymax = maze.bounds
    if not (xmin < xmax and ymin < ymax):
        raise MazeError(f"degenerate bounds {maze.bounds}")
    for arr, label in ((maze.walls, "walls"), (maze.targets, "targets"),
                       (np.array(maze.bounds), "bounds")):
        if not np.all(np.isfinite(arr)):
            raise MazeError(f"non-finite values in {label}")
    if maze.walls.shape[0] == 0:
        raise MazeError("maze has no walls")
    degenerate = np.all(maze.walls[:, :2] == maze.walls[:, 2:], axis=1)
    if np.any(degenerate):
        raise MazeError(f"degenerate wall segment(s) at index {np.flatnonzero(degenerate)}")
    if maze.targets.shape[0] == 0:
        raise MazeError("maze has no targets")
    if len(maze.starts) == 0:
        raise MazeError("maze has no start poses")

    def inside(x, y):
        return xmin < x < xmax and ymin < y < ymax

    for i, (tx, ty) in enumerate(maze.targets):
        if not inside(tx, ty):
            raise MazeError(f"target {i} at ({tx}, {ty}) not strictly inside bounds")
    for i, p in enumerate(maze.starts):
        if not math.isfinite(p.x) or not math.isfinite(p.y) or not math.isfinite(p.heading):
            raise MazeError(f"non-finite start pose {i}")
        if not inside(p.x, p.y):
            raise MazeError(f"start {i} at ({p.x}, {p.y}) not strictly inside bounds")

    # Closed-boundary probe: from every start/target and the arena center,
    # rays in all directions must hit a wall within the bounds diagonal.
    probes = [((xmin + xmax) / 2.0, (ymin + ymax) / 2.0)]
    probes += [(float(t[0]), float(t[1])) for t in maze.targets]
    probes += [(p.x, p.y) for p in maze.starts]
    diag = maze.diagonal
    for px, py in probes:
        for k in range(BOUNDARY_PROBE_RAYS):
            a = PROBE_STEP * k
            d = _kernels.ray_min_dist(maze.walls, px, py, math.cos(a), math.sin(a), diag)
            if d < 0.0:
                raise MazeError(
                    f"open boundary: ray from ({px}, {py}) at {a:.3f} rad escapes the maze")


def maze_to_dict(maze: MazeSpec) -> dict:
    return {
        "name": maze.name,
        "bounds": list(maze.bounds),
        "walls": [list(map(float, w)) for w in maze.walls],
        "targets": [list(map(float, t)) for t in maze.targets],
        "starts": [[p.x, p.y, p.heading] for p in maze.starts],
    }


def maze_from_dict(data: dict) -> MazeSpec:
    try:
        return make_maze(data["name"], data["bounds"], data["walls"],
                         data["targets"], data["starts"])
    except KeyError as exc:
        raise MazeError(f"maze file missing key {exc}") from exc


def load_maze(path) -> MazeSpec:
    """Load and validate a maze file (JSON syntax); raises MazeError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MazeError(f"cannot parse maze file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise MazeError(f"maze file {path} must contain a JSON object")
    return maze_from_dict(data)


def save_maze(maze: MazeSpec, path) -> None:
    """Write a maze file; floats keep full round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(maze_to_dict(maze), fh, indent=1)
        fh.write("\n")


def builtin_maze_path(name: str):
    """Filesystem path of a maze shipped with the package ('training'/'testing')."""
    res = resources.files(__package__) / "mazes" / f"{name}.maze"
    if not res.is_file():
        raise MazeError(f"no builtin maze named {name!r}")
    return res


def load_builtin(name: str) -> MazeSpec:
    return load_maze(builtin_maze_path(name))


def resolve_maze(spec: str) -> MazeSpec:
    """Load 'builtin:<name>' or a filesystem path."""
    if spec.startswith("builtin:"):
        return load_builtin(spec.split(":", 1)[1])
    return load_maze(spec)


def ray_cast(maze: MazeSpec, origin, angle: float, max_range: float) -> Optional[float]:
    """Distance to the nearest wall along a ray, or None within max_range."""
    if max_range <= 0.0:
        raise ValueError("max_range must be positive")
    d = _kernels.ray_min_dist(maze.walls, float(origin[0]), float(origin[1]),
                              math.cos(angle), math.sin(angle), float(max_range))
    return None if d < 0.0 else float(d)


def collides(maze: MazeSpec, center, radius: float) -> bool:
    """True iff a disc of given radius at center touches any wall."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    return bool(_kernels.min_wall_dist(maze.walls, float(center[0]), float(center[1])) < radius)


def nearest_target(p, remaining: Sequence) -> tuple:
    """(index, distance) of the closest point in `remaining`; ties -> lowest index."""
    pts = np.asarray(remaining, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("remaining targets must be non-empty")
    d = np.hypot(pts[:, 0] - float(p[0]), pts[:, 1] - float(p[1]))
    idx = int(np.argmin(d))
    return idx, float(d[idx])
