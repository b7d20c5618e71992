"""Experiment harness: seeded batches, the three study protocols, reports.

Three protocols are provided on top of the evolutionary driver:

* train      -- independent seeded runs in the training maze, per-run output
                directories plus aggregate boxplot series and the
                cross-run accumulated front.
* generalize -- the trained controllers are dropped, frozen, into the test
                maze and judged on whether they reach its target.
* adapt      -- continue evolution in the test maze from the accumulated
                front versus from scratch, tracking the reached-target
                fraction per generation.

Every output file is a pure function of (config, master seed): run seeds
are master_seed + run index, floats are written with full precision, and
aggregates are recomputed from the per-run CSVs on disk.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from . import controllers, evolution, figures, fitness, metrics, render, robot, world
from .controllers import Genome
from .evolution import ConfigError, EvoConfig, RunResult
from .fitness import FitnessConfig
from .robot import RobotParams
from .controllers import LearningSchedule

GENERATIONS_HEADER = "gen,best_f1,median_f1,best_f2,median_f2,s_measure"
STATS_HEADER = "series,gen,min,whisker_lo,q1,median,mean,q3,whisker_hi,max,outliers"


@dataclass
class ExperimentConfig:
    """Batch experiment definition (the TOML config file maps onto this)."""

    evo: EvoConfig = field(default_factory=EvoConfig)
    fit: FitnessConfig = field(default_factory=FitnessConfig)
    params: RobotParams = field(default_factory=RobotParams)
    sched: LearningSchedule = field(default_factory=LearningSchedule)
    runs: int = 30
    master_seed: int = 1
    out_dir: str = "out"
    train_maze: str = "builtin:training"
    test_maze: str = "builtin:testing"
    jobs: int = 1
    figures: bool = True
    sample_every: int = 10
    generalize_repeats: int = 3
    config_text: str = ""

    def validate(self) -> None:
        self.evo.validate()
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")
        if self.generalize_repeats < 1:
            raise ConfigError("generalize_repeats must be >= 1")


def config_obj(exp: ExperimentConfig) -> dict:
    """JSON-ready echo of every configuration field."""
    obj = asdict(exp)
    obj["params"]["sensor_headings"] = list(exp.params.sensor_headings)
    return obj


# ---------------------------------------------------------------------------
# per-run files


def write_generations_csv(path, stats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GENERATIONS_HEADER + "\n")
        for s in stats:
            fh.write(f"{s.gen},{s.best_f1!r},{s.median_f1!r},{s.best_f2!r},"
                     f"{s.median_f2!r},{s.s_measure!r}\n")


def read_generations_csv(path) -> dict:
    """Returns {column -> np.ndarray} keyed by the pinned header names."""
    cols = GENERATIONS_HEADER.split(",")
    data = {c: [] for c in cols}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != GENERATIONS_HEADER:
            raise ValueError(f"unexpected generations.csv header in {path}")
        for line in fh:
            for c, v in zip(cols, line.rstrip("\n").split(",")):
                data[c].append(float(v))
    return {c: np.asarray(v) for c, v in data.items()}


def write_reached_csv(path, stats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gen,reached_frac\n")
        for s in stats:
            fh.write(f"{s.gen},{s.reached_frac!r}\n")


def _front_entries(rr: RunResult) -> list:
    return [{"pop_index": i,
             "f1": rr.population[i].fitness[0],
             "f2": rr.population[i].fitness[1]} for i in sorted(rr.front)]


def _best_entry(entries, key):
    best = entries[0]
    for e in entries[1:]:
        if e[key] > best[key]:
            best = e
    return best


def write_run_dir(run_dir: Path, exp: ExperimentConfig, run_index: int,
                  rr: RunResult, maze: world.MazeSpec) -> None:
    """Write manifest.json, generations.csv, population.json and the best
    controllers' path traces / SVG renders for one finished run."""
    run_dir.mkdir(parents=True, exist_ok=True)
    front = _front_entries(rr)
    manifest = {
        "run_index": run_index,
        "seed": rr.config.seed,
        "kind": rr.config.kind,
        "mode": rr.config.mode,
        "generations": len(rr.gen_stats),
        "front": front,
        "best_f1": _best_entry(front, "f1"),
        "best_f2": _best_entry(front, "f2"),
        "config": config_obj(exp),
        "config_text": exp.config_text,
    }
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    write_generations_csv(run_dir / "generations.csv", rr.gen_stats)
    with open(run_dir / "population.json", "w", encoding="utf-8") as fh:
        json.dump([controllers.to_obj(rr.config.kind, ind.genome)
                   for ind in rr.population], fh)
        fh.write("\n")
    (run_dir / "paths").mkdir(exist_ok=True)
    (run_dir / "render").mkdir(exist_ok=True)
    for label in ("best_f1", "best_f2"):
        ind = rr.population[manifest[label]["pop_index"]]
        res, _ = fitness.run_episode(rr.config.kind, ind.genome, maze,
                                     maze.starts[0], fitness.FROZEN, exp.fit,
                                     exp.params, exp.sched)
        with open(run_dir / "paths" / f"{label}.csv", "w", encoding="utf-8") as fh:
            robot.write_path_csv(fh, res.path, res.events)
        render.write_svg(run_dir / "render" / f"{label}.svg",
                         render.render_svg(maze, res.path, res.events, title=label))


def _train_worker(args) -> str:
    exp, run_index = args
    maze = world.resolve_maze(exp.train_maze)
    cfg = replace(exp.evo, seed=exp.master_seed + run_index)
    rr = evolution.run_evolution(cfg, maze, exp.fit, exp.params, exp.sched)
    run_dir = Path(exp.out_dir) / f"run_{run_index:03d}"
    write_run_dir(run_dir, exp, run_index, rr, maze)
    return str(run_dir)


# ---------------------------------------------------------------------------
# aggregate statistics


def sampled_generations(total: int, every: int) -> list:
    gens = list(range(every, total + 1, every))
    if total and (not gens or gens[-1] != total):
        gens.append(total)
    return gens


def write_stats_csv(path, rows) -> None:
    """rows: iterable of (series, gen, BoxStats)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(STATS_HEADER + "\n")
        for series, gen, s in rows:
            tail = "".join(f",{v!r}" for v in s.outliers)
            fh.write(f"{series},{gen},{s.min!r},{s.whisker_lo!r},{s.q1!r},"
                     f"{s.median!r},{s.mean!r},{s.q3!r},{s.whisker_hi!r},"
                     f"{s.max!r}{tail}\n")


def aggregate_series(run_tables: list, column: str, gens: list) -> list:
    """(series, gen, BoxStats) rows across runs for one generations.csv column."""
    rows = []
    for gen in gens:
        vals = []
        for table in run_tables:
            idx = np.flatnonzero(table["gen"] == gen)
            if idx.size:
                vals.append(float(table[column][idx[0]]))
        if vals:
            rows.append((column, gen, metrics.boxplot_stats(vals)))
    return rows


def accumulated_front_members(run_dirs: list) -> list:
    """Cross-run nondominated set with genomes, from manifests + populations."""
    candidates = []
    for run_dir in run_dirs:
        with open(Path(run_dir) / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(Path(run_dir) / "population.json", "r", encoding="utf-8") as fh:
            population = json.load(fh)
        for e in manifest["front"]:
            rec = population[e["pop_index"]]
            candidates.append({
                "run": manifest["run_index"], "pop_index": e["pop_index"],
                "f1": e["f1"], "f2": e["f2"],
                "kind": rec["kind"], "flat": rec["flat"],
            })
    pts = np.array([[c["f1"], c["f2"]] for c in candidates], dtype=np.float64)
    keep = metrics.nondominated(pts)
    members = [candidates[i] for i in keep]
    members.sort(key=lambda c: (c["f1"], c["f2"]))
    return members


def cmd_train(exp: ExperimentConfig) -> Path:
    """Run the seeded batch and write per-run plus aggregate outputs."""
    exp.validate()
    world.resolve_maze(exp.train_maze)  # fail fast on config errors
    out = Path(exp.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(exp, i) for i in range(exp.runs)]
    if exp.jobs > 1:
        with ProcessPoolExecutor(max_workers=exp.jobs) as pool:
            run_dirs = list(pool.map(_train_worker, jobs))
    else:
        run_dirs = [_train_worker(j) for j in jobs]
    run_dirs = sorted(run_dirs)

    agg = out / "aggregate"
    agg.mkdir(exist_ok=True)
    tables = [read_generations_csv(Path(d) / "generations.csv") for d in run_dirs]
    total_gens = exp.evo.phase1_gens + exp.evo.phase2_gens
    gens = sampled_generations(total_gens, exp.sample_every)
    series_rows = {}
    for column in ("best_f1", "best_f2", "s_measure"):
        rows = aggregate_series(tables, column, gens)
        series_rows[column] = rows
        write_stats_csv(agg / f"{column}.csv", rows)

    members = accumulated_front_members(run_dirs)
    with open(agg / "front.json", "w", encoding="utf-8") as fh:
        json.dump({"kind": exp.evo.kind, "mode": exp.evo.mode,
                   "members": members}, fh)
        fh.write("\n")

    if exp.figures:
        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        label = f"{exp.evo.kind.upper()} {exp.evo.mode.upper()}"
        for column, rows in series_rows.items():
            if rows:
                figures.boxplot_figure(
                    [g for _, g, _ in rows], [s for _, _, s in rows],
                    column, f"{label}: {column} over {exp.runs} runs",
                    figdir / f"{column}.png", phase_boundary=exp.evo.phase1_gens)
        run_fronts = []
        for d in run_dirs:
            with open(Path(d) / "manifest.json", "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
            run_fronts.append([[e["f1"], e["f2"]] for e in manifest["front"]])
        acc = [[m["f1"], m["f2"]] for m in members]
        figures.fronts_figure(run_fronts, acc, f"{label}: final fronts",
                              figdir / "fronts.png")
    return out


# ---------------------------------------------------------------------------
# generalization protocol


def _run_frozen_test(kind: str, genome: Genome, maze: world.MazeSpec,
                     exp: ExperimentConfig) -> fitness.EpisodeResult:
    budget = FitnessConfig(max_step=exp.fit.max_step * exp.generalize_repeats,
                           hit_reward=exp.fit.hit_reward)
    res, _ = fitness.run_episode(kind, genome, maze, maze.starts[0],
                                 fitness.FROZEN, budget, exp.params, exp.sched)
    return res


def cmd_generalize(train_dir, exp: ExperimentConfig, out_dir=None) -> dict:
    """Run trained controllers, frozen, in the test maze; report who reached.

    Tests each run's best-f1 and best-f2 front controllers plus every
    member of the accumulated cross-run front (extremes tagged). Writes
    report.json, per-controller path traces and SVG renders.
    """
    train_dir = Path(train_dir)
    out = Path(out_dir) if out_dir is not None else train_dir / "generalize"
    test_maze = world.resolve_maze(exp.test_maze)
    run_dirs = sorted(p for p in train_dir.glob("run_*") if p.is_dir())
    if not run_dirs:
        raise ConfigError(f"no run directories under {train_dir}")

    entries = []
    for d in run_dirs:
        with open(d / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(d / "population.json", "r", encoding="utf-8") as fh:
            population = json.load(fh)
        for selector in ("best_f1", "best_f2"):
            rec = population[manifest[selector]["pop_index"]]
            entries.append({
                "id": f"run{manifest['run_index']:03d}_{selector}",
                "selector": selector, "source": f"run_{manifest['run_index']:03d}",
                "kind": rec["kind"], "flat": rec["flat"],
                "train_f1": manifest[selector]["f1"],
                "train_f2": manifest[selector]["f2"],
            })
    front_path = train_dir / "aggregate" / "front.json"
    if front_path.is_file():
        with open(front_path, "r", encoding="utf-8") as fh:
            members = json.load(fh)["members"]
        best1 = max(range(len(members)), key=lambda i: members[i]["f1"])
        best2 = max(range(len(members)), key=lambda i: members[i]["f2"])
        for i, m in enumerate(members):
            tags = []
            if i == best1:
                tags.append("best_f1")
            if i == best2:
                tags.append("best_f2")
            entries.append({
                "id": f"front{i:03d}", "selector": "front",
                "source": f"run_{m['run']:03d}", "tags": tags,
                "kind": m["kind"], "flat": m["flat"],
                "train_f1": m["f1"], "train_f2": m["f2"],
            })

    (out / "paths").mkdir(parents=True, exist_ok=True)
    (out / "render").mkdir(exist_ok=True)
    report_entries = []
    reached_paths = {}
    for e in entries:
        kind, genome = controllers.from_obj({"kind": e["kind"], "flat": e["flat"]})
        res = _run_frozen_test(kind, genome, test_maze, exp)
        with open(out / "paths" / f"{e['id']}.csv", "w", encoding="utf-8") as fh:
            robot.write_path_csv(fh, res.path, res.events)
        render.write_svg(out / "render" / f"{e['id']}.svg",
                         render.render_svg(test_maze, res.path, res.events,
                                           title=e["id"]))
        entry = {k: v for k, v in e.items() if k != "flat"}
        entry.update(fitness.summary_obj(res))
        entry["reached"] = res.reached
        report_entries.append(entry)
        if res.reached and e["selector"] in ("best_f1", "best_f2") and len(reached_paths) < 8:
            reached_paths[e["id"]] = res.path

    summary = {}
    for selector in ("best_f1", "best_f2", "front"):
        group = [e for e in report_entries if e["selector"] == selector]
        if group:
            summary[selector] = {
                "tested": len(group),
                "reached": sum(1 for e in group if e["reached"]),
                "fraction": sum(1 for e in group if e["reached"]) / len(group),
            }
    report = {
        "test_maze": exp.test_maze,
        "step_budget": exp.fit.max_step * exp.generalize_repeats,
        "kind": entries[0]["kind"] if entries else None,
        "summary": summary,
        "entries": report_entries,
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    if exp.figures and reached_paths:
        figures.paths_figure(test_maze, reached_paths,
                             "test maze: successful controllers",
                             out / "paths.png")
    return report


# ---------------------------------------------------------------------------
# adaptation protocol


def load_front_genomes(train_dir) -> tuple:
    front_path = Path(train_dir) / "aggregate" / "front.json"
    with open(front_path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    genomes = [controllers.decode(m["flat"]) for m in data["members"]]
    return data["kind"], genomes


def pad_population(genomes: list, size: int) -> list:
    """Round-robin clone (or truncate) a genome list to exactly `size`."""
    if not genomes:
        raise ConfigError("cannot pad an empty population")
    return [genomes[i % len(genomes)].copy() for i in range(size)]


def cmd_adapt(train_dir, exp: ExperimentConfig, out_dir=None) -> dict:
    """Adaptation study in the test maze: pretrained front vs. random start.

    Both arms run the two-phase driver with a single group from the test
    start, over `exp.runs` seeds. Emits per-arm per-seed generation stats,
    the reached-target fraction curves, and f1 boxplot series.
    """
    exp.validate()
    out = Path(out_dir) if out_dir is not None else Path(exp.out_dir)
    test_maze = world.resolve_maze(exp.test_maze)
    adapt_evo = replace(exp.evo, groups=1, group_size=exp.evo.pop_size)
    adapt_evo.validate()

    kind, front_genomes = load_front_genomes(train_dir)
    if kind != adapt_evo.kind:
        raise ConfigError(
            f"pretrained front holds {kind} controllers but config wants {adapt_evo.kind}")
    pretrained = pad_population(front_genomes, adapt_evo.pop_size)

    total_gens = adapt_evo.phase1_gens + adapt_evo.phase2_gens
    arms = {"pretrained": pretrained, "random": None}
    curves = {}
    arm_tables = {}
    for arm, init in arms.items():
        arm_dir = out / arm
        arm_dir.mkdir(parents=True, exist_ok=True)
        per_seed = []
        for s in range(exp.runs):
            cfg = replace(adapt_evo, seed=exp.master_seed + s)
            rr = evolution.run_evolution(cfg, test_maze, exp.fit, exp.params,
                                         exp.sched, initial_genomes=init)
            run_dir = arm_dir / f"run_{s:03d}"
            run_dir.mkdir(exist_ok=True)
            write_generations_csv(run_dir / "generations.csv", rr.gen_stats)
            write_reached_csv(run_dir / "reached.csv", rr.gen_stats)
            per_seed.append(rr.gen_stats)
        curves[arm] = per_seed
        arm_tables[arm] = [
            {"gen": np.array([st.gen for st in stats], dtype=np.float64),
             "best_f1": np.array([st.best_f1 for st in stats]),
             "reached": np.array([st.reached_frac for st in stats])}
            for stats in per_seed]

    agg = out / "aggregate"
    agg.mkdir(exist_ok=True)
    gens = [st.gen for st in curves["pretrained"][0]]
    with open(agg / "reached_fraction.csv", "w", encoding="utf-8") as fh:
        seed_cols = ",".join(f"seed{s}" for s in range(exp.runs))
        fh.write(f"arm,gen,mean,{seed_cols}\n")
        for arm in arms:
            for gi, gen in enumerate(gens):
                vals = [stats[gi].reached_frac for stats in curves[arm]]
                cells = ",".join(repr(v) for v in vals)
                fh.write(f"{arm},{gen},{np.mean(vals)!r},{cells}\n")
    sampled = sampled_generations(total_gens, exp.sample_every)
    for arm in arms:
        tables = [{"gen": t["gen"], "best_f1": t["best_f1"]} for t in arm_tables[arm]]
        write_stats_csv(agg / f"f1_{arm}.csv",
                        aggregate_series(tables, "best_f1", sampled))

    mean_curves = {
        arm: [float(np.mean([stats[gi].reached_frac for stats in curves[arm]]))
              for gi in range(len(gens))]
        for arm in arms}
    if exp.figures:
        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        figures.curves_figure(gens, mean_curves, "generation",
                              "fraction reaching target",
                              f"adaptation ({adapt_evo.kind}, {adapt_evo.mode})",
                              figdir / "reached_fraction.png",
                              phase_boundary=adapt_evo.phase1_gens)
    result = {"gens": gens, "reached": mean_curves,
              "phase_boundary": adapt_evo.phase1_gens}
    with open(out / "adapt_summary.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=1)
        fh.write("\n")
    return result


# ---------------------------------------------------------------------------
# cross-batch statistics


def cmd_stats(dir_a, dir_b, exp: ExperimentConfig, objective: str = "f2",
              out_dir=None) -> dict:
    """Aggregate two run sets and rank-sum-compare their final objectives."""
    if objective not in ("f1", "f2"):
        raise ConfigError("objective must be 'f1' or 'f2'")
    column = f"best_{objective}"
    out = Path(out_dir) if out_dir is not None else Path(exp.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    finals = {}
    for label, d in (("a", Path(dir_a)), ("b", Path(dir_b))):
        run_dirs = sorted(p for p in d.glob("run_*") if p.is_dir())
        if not run_dirs:
            raise ConfigError(f"no run directories under {d}")
        tables = [read_generations_csv(p / "generations.csv") for p in run_dirs]
        total = int(max(t["gen"][-1] for t in tables))
        gens = sampled_generations(total, exp.sample_every)
        write_stats_csv(out / f"{label}_{column}.csv",
                        aggregate_series(tables, column, gens))
        finals[label] = [float(t[column][-1]) for t in tables]
    p = metrics.rank_sum_test(finals["a"], finals["b"])
    result = {
        "objective": objective,
        "n_a": len(finals["a"]), "n_b": len(finals["b"]),
        "median_a": float(np.median(finals["a"])),
        "median_b": float(np.median(finals["b"])),
        "p_value": p,
    }
    with open(out / "wilcoxon.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=1)
        fh.write("\n")
    return result


def cmd_render(maze_spec: str, trace_path, out_path) -> None:
    """Render a stored path trace over its maze to a deterministic SVG."""
    maze = world.resolve_maze(maze_spec)
    with open(trace_path, "r", encoding="utf-8") as fh:
        path, events = robot.read_path_csv(fh)
    render.write_svg(out_path, render.render_svg(maze, path, events,
                                                 title=Path(trace_path).stem))
