"""Differential-drive robot: kinematics, the 16-sensor model, step mechanics.

The robot is a 5.5 cm diameter two-wheel platform. Eight infra-red obstacle
sensors (5 cm range, 6 degree span) and eight target sensors (100 cm range,
30 degree span) are mounted in pairs at eight equally spaced locations on
the periphery. Wheel commands are angular speeds clamped to [-0.5, 0.5]
rad/s; with 1 cm wheels and a 5 s time step the robot covers 2.5 cm per
step at full speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels, world
from .world import MazeSpec, Pose

DEFAULT_SENSOR_HEADINGS = tuple(i * math.pi / 4.0 for i in range(8))

COLLISION = "collision"
STEP_LIMIT = "step-limit"


@dataclass(frozen=True)
class RobotParams:
    """Physical robot and sensor constants (cm, s, rad)."""

    body_radius: float = 2.75
    wheel_radius: float = 1.0
    axle_length: float = 5.5
    dt: float = 5.0
    speed_limit: float = 0.5
    ir_range: float = 5.0
    ir_half_span: float = math.radians(3.0)
    target_range: float = 100.0
    target_half_span: float = math.radians(15.0)
    sensor_headings: tuple = DEFAULT_SENSOR_HEADINGS

    def heading_array(self) -> np.ndarray:
        return np.asarray(self.sensor_headings, dtype=np.float64)


@dataclass
class StepEvents:
    """What happened during one advance(): collision flag and consumed targets."""

    collided: bool = False
    targets_hit: tuple = ()


@dataclass
class EpisodeState:
    """Mutable-episode bookkeeping; advance() returns an updated copy."""

    pose: Pose
    step: int = 0
    remaining: frozenset = frozenset()
    consumed_count: int = 0
    terminated: Optional[str] = None
    path: tuple = ()

    @classmethod
    def initial(cls, maze: MazeSpec, start: Pose) -> "EpisodeState":
        return cls(pose=start, remaining=frozenset(range(maze.targets.shape[0])),
                   path=(start,))


def step_kinematics(pose: Pose, wl: float, wr: float, params: RobotParams) -> Pose:
    """Exact unicycle arc update over one time step; commands are clamped."""
    x, y, h = _kernels.step_kinematics(pose.x, pose.y, pose.heading, float(wl), float(wr),
                                       params.wheel_radius, params.axle_length,
                                       params.dt, params.speed_limit)
    return Pose(x, y, h)


def read_sensors(maze: MazeSpec, pose: Pose, remaining, params: RobotParams) -> np.ndarray:
    """16 activations in [0, 1]: 8 obstacle (IR) then 8 target, paired per mount.

    `remaining` is the set of still-active target indices.
    """
    mask = np.zeros(maze.targets.shape[0], dtype=np.bool_)
    for t in remaining:
        mask[t] = True
    out = np.empty(16, dtype=np.float64)
    _kernels.read_sensors(maze.walls, maze.targets, mask, pose.x, pose.y, pose.heading,
                          params.body_radius, params.ir_range, params.ir_half_span,
                          params.target_range, params.target_half_span,
                          params.heading_array(), out)
    return out


def _target_dist(maze: MazeSpec, t: int, pose: Pose) -> float:
    # same arithmetic as the compiled episode loop (not hypot)
    dx = maze.targets[t, 0] - pose.x
    dy = maze.targets[t, 1] - pose.y
    return math.sqrt(dx * dx + dy * dy)


def advance(state: EpisodeState, maze: MazeSpec, wl: float, wr: float,
            params: RobotParams, max_steps: int):
    """Apply one commanded step; returns (new state, StepEvents).

    A move that would bring the body into wall contact is rolled back and
    terminates the episode with `collision`; the recorded pose for that step
    is the pre-step pose. Targets within body radius after a legal move are
    consumed; when the last one is consumed all targets respawn. Reaching
    max_steps terminates with `step-limit`.
    """
    if state.terminated is not None:
        raise RuntimeError("cannot advance a terminated episode")
    new_pose = step_kinematics(state.pose, wl, wr, params)
    step = state.step + 1
    if world.collides(maze, (new_pose.x, new_pose.y), params.body_radius):
        new_state = replace(state, step=step, path=state.path + (state.pose,),
                            terminated=COLLISION)
        return new_state, StepEvents(collided=True)
    hits = tuple(sorted(
        t for t in state.remaining
        if _target_dist(maze, t, new_pose) <= params.body_radius))
    remaining = state.remaining - frozenset(hits)
    if not remaining:
        remaining = frozenset(range(maze.targets.shape[0]))
    terminated = STEP_LIMIT if step >= max_steps else None
    new_state = replace(state, pose=new_pose, step=step, remaining=remaining,
                        consumed_count=state.consumed_count + len(hits),
                        terminated=terminated, path=state.path + (new_pose,))
    return new_state, StepEvents(collided=False, targets_hit=hits)


def event_label(event: int) -> str:
    """CSV event column value for one step's event word."""
    if event < 0:
        return "collision"
    if event == 0:
        return ""
    idxs = [str(i) for i in range(event.bit_length()) if event >> i & 1]
    return "hit:" + ";".join(idxs)


def write_path_csv(fh, path: np.ndarray, events: np.ndarray) -> None:
    """Write a path trace as CSV rows `step,x,y,heading,event`.

    `path` is (n + 1, 3) poses and `events` the n per-step event words
    (target bitmask, -1 for the collision step).
    """
    fh.write("step,x,y,heading,event\n")
    for i in range(path.shape[0]):
        ev = event_label(int(events[i - 1])) if i > 0 else ""
        fh.write(f"{i},{path[i, 0]!r},{path[i, 1]!r},{path[i, 2]!r},{ev}\n")


def read_path_csv(fh) -> tuple:
    """Inverse of write_path_csv; returns (path (n+1, 3), events (n,))."""
    header = fh.readline()
    if not header.startswith("step,"):
        raise ValueError("not a path trace CSV")
    rows = []
    events = []
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        step, x, y, h, ev = line.split(",", 4)
        rows.append((float(x), float(y), float(h)))
        if int(step) > 0:
            if ev == "collision":
                events.append(-1)
            elif ev.startswith("hit:"):
                word = 0
                for tok in ev[4:].split(";"):
                    word |= 1 << int(tok)
                events.append(word)
            else:
                events.append(0)
    return np.asarray(rows, dtype=np.float64), np.asarray(events, dtype=np.int64)
