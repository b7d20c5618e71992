"""Command-line front end: train / generalize / adapt / render / stats.

Experiments are defined by a TOML config file; every field has a default
matching the reference setup, and `--seed`, `--runs`, `--out` override the
file. Exit codes: 0 success, 1 configuration error, 2 runtime/I-O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness
from .controllers import LearningSchedule
from .evolution import ConfigError, EvoConfig
from .fitness import FitnessConfig
from .harness import ExperimentConfig
from .robot import RobotParams
from .world import MazeError

_RUN_KEYS = {"runs", "master_seed", "out", "train_maze", "test_maze", "jobs",
             "figures", "sample_every", "generalize_repeats"}
_EVO_KEYS = {"mode", "kind", "pop_size", "groups", "group_size", "phase1_gens",
             "phase2_gens", "p_cross_phase1", "p_cross_phase2", "eta_c",
             "eta_m", "p_mut", "lamarckian", "phase2_starts"}
_FITNESS_KEYS = {"max_step", "hit_reward"}
_ROBOT_DEG_KEYS = {"ir_half_span_deg": "ir_half_span",
                   "target_half_span_deg": "target_half_span"}
_ROBOT_KEYS = {"body_radius", "wheel_radius", "axle_length", "dt", "speed_limit",
               "ir_range", "target_range", "sensor_headings_deg"} | set(_ROBOT_DEG_KEYS)
_LEARNING_KEYS = {"eta0", "eta_end", "horizon"}


def _check_keys(section: str, table: dict, allowed: set) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")


def load_config(path=None) -> ExperimentConfig:
    """Build an ExperimentConfig from a TOML file (or pure defaults)."""
    text = ""
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = fh.read()
        text = raw.decode("utf-8")
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _check_keys("<top>", data, {"run", "evo", "fitness", "robot", "learning"})

    run = data.get("run", {})
    _check_keys("run", run, _RUN_KEYS)
    evo_tbl = data.get("evo", {})
    _check_keys("evo", evo_tbl, _EVO_KEYS)
    fit_tbl = data.get("fitness", {})
    _check_keys("fitness", fit_tbl, _FITNESS_KEYS)
    robot_tbl = dict(data.get("robot", {}))
    _check_keys("robot", robot_tbl, _ROBOT_KEYS)
    learn_tbl = data.get("learning", {})
    _check_keys("learning", learn_tbl, _LEARNING_KEYS)

    for deg_key, rad_key in _ROBOT_DEG_KEYS.items():
        if deg_key in robot_tbl:
            robot_tbl[rad_key] = math.radians(robot_tbl.pop(deg_key))
    if "sensor_headings_deg" in robot_tbl:
        degs = robot_tbl.pop("sensor_headings_deg")
        robot_tbl["sensor_headings"] = tuple(math.radians(d) for d in degs)

    try:
        exp = ExperimentConfig(
            evo=EvoConfig(**evo_tbl),
            fit=FitnessConfig(**fit_tbl),
            params=RobotParams(**robot_tbl),
            sched=LearningSchedule(**learn_tbl),
            runs=run.get("runs", 30),
            master_seed=run.get("master_seed", 1),
            out_dir=run.get("out", "out"),
            train_maze=run.get("train_maze", "builtin:training"),
            test_maze=run.get("test_maze", "builtin:testing"),
            jobs=run.get("jobs", 1),
            figures=run.get("figures", True),
            sample_every=run.get("sample_every", 10),
            generalize_repeats=run.get("generalize_repeats", 3),
            config_text=text,
        )
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    exp.validate()
    return exp


def _apply_overrides(exp: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        exp.master_seed = args.seed
    if getattr(args, "runs", None) is not None:
        exp.runs = args.runs
    if getattr(args, "out", None) is not None:
        exp.out_dir = args.out
    if getattr(args, "jobs", None) is not None:
        exp.jobs = args.jobs
    if getattr(args, "kind", None) is not None:
        exp.evo = replace(exp.evo, kind=args.kind)
    if getattr(args, "mode", None) is not None:
        exp.evo = replace(exp.evo, mode=args.mode)
    exp.validate()
    return exp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpnav",
        description="Evolve and study maze-navigation neuro-controllers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("-c", "--config", help="TOML experiment config")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--runs", type=int, help="override run count")
        p.add_argument("--out", help="override output directory")

    p_train = sub.add_parser("train", help="run a seeded training batch")
    add_common(p_train)
    p_train.add_argument("--jobs", type=int, help="parallel worker processes")
    p_train.add_argument("--kind", choices=("cpnc", "ffnc"))
    p_train.add_argument("--mode", choices=("moop", "soop_f1", "soop_f2"))

    p_gen = sub.add_parser("generalize",
                           help="run trained controllers frozen in the test maze")
    add_common(p_gen)
    p_gen.add_argument("--train-dir", required=True,
                       help="output directory of a finished train batch")
    p_gen.add_argument("--maze", help="override test maze path")
    p_gen.add_argument("--repeats", type=int,
                       help="episode budget in multiples of max_step")

    p_adapt = sub.add_parser("adapt",
                             help="pretrained vs. random evolution in the test maze")
    add_common(p_adapt)
    p_adapt.add_argument("--train-dir", required=True,
                         help="train batch supplying the accumulated front")
    p_adapt.add_argument("--maze", help="override test maze path")

    p_render = sub.add_parser("render", help="render a path trace to SVG")
    p_render.add_argument("--maze", required=True)
    p_render.add_argument("--trace", required=True)
    p_render.add_argument("--out", required=True)

    p_stats = sub.add_parser("stats", help="aggregate and compare two run sets")
    add_common(p_stats)
    p_stats.add_argument("--a", required=True, help="first run-set directory")
    p_stats.add_argument("--b", required=True, help="second run-set directory")
    p_stats.add_argument("--objective", choices=("f1", "f2"), default="f2")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            harness.cmd_render(args.maze, args.trace, args.out)
            return 0
        exp = load_config(getattr(args, "config", None))
        exp = _apply_overrides(exp, args)
        if args.command == "train":
            out = harness.cmd_train(exp)
            print(f"wrote {exp.runs} runs to {out}")
        elif args.command == "generalize":
            if args.maze:
                exp.test_maze = args.maze
            if args.repeats:
                exp.generalize_repeats = args.repeats
            report = harness.cmd_generalize(args.train_dir, exp,
                                            out_dir=getattr(args, "out", None))
            for selector, s in report["summary"].items():
                print(f"{selector}: {s['reached']}/{s['tested']} reached "
                      f"({s['fraction']:.2f})")
        elif args.command == "adapt":
            if args.maze:
                exp.test_maze = args.maze
            result = harness.cmd_adapt(args.train_dir, exp,
                                       out_dir=getattr(args, "out", None))
            last = {arm: ys[-1] for arm, ys in result["reached"].items()}
            print(f"final reached fraction: {last}")
        elif args.command == "stats":
            result = harness.cmd_stats(args.a, args.b, exp,
                                       objective=args.objective,
                                       out_dir=getattr(args, "out", None))
            print(f"rank-sum p={result['p_value']:.4g} "
                  f"(medians {result['median_a']:.4g} vs {result['median_b']:.4g})")
        return 0
    except (ConfigError, MazeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
