"""Objective functions and the episode evaluation protocol.

Two objectives, both maximized and both averaged over the full step budget
so truncated (crashed) episodes score low:

* f1 rewards fast, straight, obstacle-free motion: per step
  |wl + wr| * (1 - sqrt(|wl - wr|)) * (1 - I), I = max IR activation.
* f2 rewards approaching and touching targets: a fixed reward on a step
  that consumes a target, else 1 / (1 + d) with d the distance to the
  nearest remaining target.

An evaluation runs, per start pose, a learning episode (CPNC prototypes
adapt online) followed by a frozen episode that produces the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels, controllers, robot
from .controllers import CPNC, FFNC, Genome, LearningSchedule
from .robot import RobotParams
from .world import MazeSpec, Pose

LEARN = "learn"
FROZEN = "frozen"


@dataclass(frozen=True)
class FitnessConfig:
    """Step budget and target-touch reward."""

    max_step: int = 200
    hit_reward: float = 50.0


@dataclass
class EpisodeResult:
    """One episode's trace and scores."""

    f1: float
    f2: float
    steps: int
    termination: str
    first_target_hit_step: Optional[int]
    consumed_count: int
    path: np.ndarray  # (steps + 1, 3) poses
    events: np.ndarray  # (steps,) target bitmask per step, -1 on collision

    @property
    def reached(self) -> bool:
        return self.first_target_hit_step is not None


def f1_step(wl: float, wr: float, i_max: float) -> float:
    """Per-step speed/straightness/safety increment, in [0, 1] for valid inputs."""
    return abs(wl + wr) * (1.0 - math.sqrt(abs(wl - wr))) * (1.0 - i_max)


def f2_step(hit: bool, d: float, cfg: FitnessConfig) -> float:
    """Per-step target increment: the touch reward, else 1 / (1 + d)."""
    if hit:
        return cfg.hit_reward
    return 1.0 / (1.0 + d)


def summary_obj(res: EpisodeResult) -> dict:
    """JSON-ready episode summary."""
    return {
        "f1": res.f1,
        "f2": res.f2,
        "steps": res.steps,
        "termination": res.termination,
        "first_hit_step": res.first_target_hit_step,
    }


def run_episode(kind: str, genome: Genome, maze: MazeSpec, start: Pose, mode: str,
                cfg: FitnessConfig, params: RobotParams,
                sched: LearningSchedule) -> tuple:
    """Run one episode; returns (EpisodeResult, genome after the episode).

    In learn mode a CPNC adapts its prototype rows at every step (update on
    the current input before acting on it); frozen mode never modifies the
    genome. FFNC genomes pass through unchanged in both modes.
    """
    if mode not in (LEARN, FROZEN):
        raise ValueError(f"mode must be 'learn' or 'frozen', got {mode!r}")
    if kind not in controllers.KINDS:
        raise ValueError(f"unknown controller kind {kind!r}")
    learn = mode == LEARN and kind == CPNC
    out_genome = genome.copy() if learn else genome
    path = np.empty((cfg.max_step + 1, 3), dtype=np.float64)
    events = np.zeros(cfg.max_step, dtype=np.int64)
    f1, f2, steps, collided, first_hit, consumed = _kernels.run_episode_kernel(
        maze.walls, maze.targets, out_genome.kohonen, out_genome.grossberg,
        out_genome.slope, kind == FFNC, learn, start.x, start.y, start.heading,
        params.body_radius, params.wheel_radius, params.axle_length, params.dt,
        params.speed_limit, params.ir_range, params.ir_half_span,
        params.target_range, params.target_half_span, params.heading_array(),
        cfg.max_step, cfg.hit_reward, sched.eta0, sched.decay, path, events)
    res = EpisodeResult(
        f1=float(f1), f2=float(f2), steps=int(steps),
        termination=robot.COLLISION if collided else robot.STEP_LIMIT,
        first_target_hit_step=None if first_hit < 0 else int(first_hit),
        consumed_count=int(consumed),
        path=path[:steps + 1].copy(), events=events[:steps].copy())
    return res, out_genome


def run_policy_episode(policy: Callable, maze: MazeSpec, start: Pose,
                       cfg: FitnessConfig, params: RobotParams) -> EpisodeResult:
    """Run an episode driven by an arbitrary policy(step, sensors) -> (wl, wr).

    Pure-Python counterpart of run_episode's compiled loop (same step
    semantics, no learning); used for scripted controllers and as a
    cross-check of the compiled path.
    """
    state = robot.EpisodeState.initial(maze, start)
    f1 = 0.0
    f2 = 0.0
    first_hit = None
    events = []
    while state.terminated is None and state.step < cfg.max_step:
        s = robot.read_sensors(maze, state.pose, state.remaining, params)
        wl, wr = policy(state.step, s)
        wl = min(max(float(wl), -params.speed_limit), params.speed_limit)
        wr = min(max(float(wr), -params.speed_limit), params.speed_limit)
        pre_remaining = state.remaining
        state, ev = robot.advance(state, maze, wl, wr, params, cfg.max_step)
        f1 += f1_step(wl, wr, float(np.max(s[:8])))
        if ev.collided:
            f2 += f2_step(False, _nearest_dist(maze, pre_remaining, state.pose), cfg)
            events.append(-1)
        elif ev.targets_hit:
            f2 += f2_step(True, 0.0, cfg)
            if first_hit is None:
                first_hit = state.step
            events.append(sum(1 << t for t in ev.targets_hit))
        else:
            f2 += f2_step(False, _nearest_dist(maze, state.remaining, state.pose), cfg)
            events.append(0)
    path = np.array([p.as_tuple() for p in state.path], dtype=np.float64)
    return EpisodeResult(
        f1=f1 / cfg.max_step, f2=f2 / cfg.max_step, steps=state.step,
        termination=state.terminated, first_target_hit_step=first_hit,
        consumed_count=state.consumed_count,
        path=path, events=np.asarray(events, dtype=np.int64))


def _nearest_dist(maze: MazeSpec, remaining, pose: Pose) -> float:
    best = math.inf
    for t in remaining:
        dx = maze.targets[t, 0] - pose.x
        dy = maze.targets[t, 1] - pose.y
        d = math.sqrt(dx * dx + dy * dy)
        if d < best:
            best = d
    return best


def evaluate(kind: str, genome: Genome, maze: MazeSpec, starts, cfg: FitnessConfig,
             params: RobotParams, sched: LearningSchedule) -> tuple:
    """Learn-then-frozen evaluation over the given start poses.

    Returns ((f1, f2), final genome, frozen EpisodeResults). The fitness is
    the arithmetic mean of the frozen episodes' scores; the genome carries
    any lifetime learning forward across starts. For FFNC the learning
    episode is skipped outright (it cannot change the genome and scores
    nothing).
    """
    if len(starts) == 0:
        raise ValueError("evaluate needs at least one start pose")
    g = genome
    results = []
    for start in starts:
        if kind == CPNC:
            _, g = run_episode(kind, g, maze, start, LEARN, cfg, params, sched)
        res, _ = run_episode(kind, g, maze, start, FROZEN, cfg, params, sched)
        results.append(res)
    n = float(len(results))
    fit = (sum(r.f1 for r in results) / n, sum(r.f2 for r in results) / n)
    return fit, g, results
