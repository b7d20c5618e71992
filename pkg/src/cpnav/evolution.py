"""NSGA-II machinery, variation operators, and the two-phase driver.

Phase 1 splits the population into groups, one per start pose; each group
evolves alone with the clustering layer frozen against variation (only the
output mapping is recombined and mutated) while lifetime learning shapes
the prototypes. Phase 2 merges the groups and recombines whole controllers,
aligning prototype rows between parents by nearest-neighbour matching so
output genes stay attached to the class they were learnt for.

Single-objective runs reuse the same machinery with the inactive objective
masked to a constant, which collapses the dominance ranking to a plain
single-objective ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import controllers, fitness, metrics
from .controllers import CPNC, FFNC, Genome, LearningSchedule
from .fitness import FitnessConfig
from .robot import RobotParams
from .world import MazeSpec

MOOP = "moop"
SOOP_F1 = "soop_f1"
SOOP_F2 = "soop_f2"
MODES = (MOOP, SOOP_F1, SOOP_F2)

PHASE1 = 1
PHASE2 = 2


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class Individual:
    genome: Genome
    fitness: Optional[tuple] = None  # raw (f1, f2)
    rank: int = 0
    crowding: float = 0.0
    reached: bool = False  # any frozen episode touched a target


@dataclass(frozen=True)
class EvoConfig:
    """Evolutionary search settings (defaults reproduce the reference setup)."""

    mode: str = MOOP
    kind: str = CPNC
    pop_size: int = 56
    groups: int = 4
    group_size: int = 14
    phase1_gens: int = 50
    phase2_gens: int = 250
    p_cross_phase1: float = 1.0
    p_cross_phase2: float = 0.5
    eta_c: float = 10.0
    eta_m: float = 20.0
    p_mut: float = 1.0 / 18.0
    seed: int = 1
    lamarckian: bool = True
    phase2_starts: str = "all"  # "all" or an index into maze.starts

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.kind not in controllers.KINDS:
            raise ConfigError(f"kind must be one of {controllers.KINDS}, got {self.kind!r}")
        if self.groups * self.group_size != self.pop_size:
            raise ConfigError(
                f"groups*group_size must equal pop_size "
                f"({self.groups}*{self.group_size} != {self.pop_size})")
        if self.pop_size < 2 or self.group_size < 2:
            raise ConfigError("population and group sizes must be at least 2")
        for name in ("p_cross_phase1", "p_cross_phase2", "p_mut"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.phase1_gens < 0 or self.phase2_gens < 0:
            raise ConfigError("generation budgets must be non-negative")


@dataclass
class GenStats:
    """Per-generation population summary (raw, unmasked objectives)."""

    gen: int
    best_f1: float
    median_f1: float
    best_f2: float
    median_f2: float
    s_measure: float
    reached_frac: float


@dataclass
class RunResult:
    """One full evolutionary run: statistics, final population, final front."""

    config: EvoConfig
    gen_stats: list
    population: list  # Individuals
    front: list  # indices into population, masked-dominance front

    def front_individuals(self) -> list:
        return [self.population[i] for i in self.front]


# ---------------------------------------------------------------------------
# dominance, sorting, selection


def soop_mask(fit: tuple, mode: str) -> tuple:
    """Hold the inactive objective constant so ranking sees only the live one."""
    if mode == SOOP_F1:
        return (fit[0], 0.0)
    if mode == SOOP_F2:
        return (0.0, fit[1])
    return fit


def dominates(a: tuple, b: tuple, mode: str = MOOP) -> bool:
    """Max-max dominance after masking both vectors for the given mode."""
    return metrics.dominates(soop_mask(a, mode), soop_mask(b, mode))


def fast_nondominated_sort(points) -> list:
    """Deb's fast nondominated sort; fronts hold indices in input order."""
    pts = [tuple(p) for p in points]
    n = len(pts)
    dominated_by = [[] for _ in range(n)]
    count = [0] * n
    fronts = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if metrics.dominates(pts[p], pts[q]):
                dominated_by[p].append(q)
            elif metrics.dominates(pts[q], pts[p]):
                count[p] += 1
        if count[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                count[q] -= 1
                if count[q] == 0:
                    nxt.append(q)
        i += 1
        fronts.append(sorted(nxt))
    fronts.pop()
    return fronts


def crowding_distance(front_points) -> np.ndarray:
    """NSGA-II crowding distances for one front's objective vectors."""
    pts = np.asarray(front_points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    dist = np.zeros(n, dtype=np.float64)
    if n == 0:
        return dist
    for m in range(2):
        order = np.argsort(pts[:, m], kind="stable")
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        span = pts[order[-1], m] - pts[order[0], m]
        if span > 0.0:
            for k in range(1, n - 1):
                dist[order[k]] += (pts[order[k + 1], m] - pts[order[k - 1], m]) / span
    return dist


def tournament_select(pop: list, rng: np.random.Generator) -> int:
    """Binary tournament on (rank, crowding); full ties go to the first drawn."""
    i = int(rng.integers(len(pop)))
    j = int(rng.integers(len(pop)))
    a, b = pop[i], pop[j]
    if b.rank < a.rank:
        return j
    if a.rank < b.rank:
        return i
    if b.crowding > a.crowding:
        return j
    return i


def assign_ranks(pop: list, mode: str) -> list:
    """Set rank/crowding on every individual; returns the masked fronts."""
    masked = [soop_mask(ind.fitness, mode) for ind in pop]
    fronts = fast_nondominated_sort(masked)
    for r, front in enumerate(fronts):
        crowd = crowding_distance([masked[i] for i in front])
        for slot, i in enumerate(front):
            pop[i].rank = r
            pop[i].crowding = float(crowd[slot])
    return fronts


def environmental_selection(pop: list, size: int, mode: str) -> list:
    """mu+lambda NSGA-II truncation to `size` by rank, then crowding."""
    fronts = assign_ranks(pop, mode)
    survivors = []
    for front in fronts:
        if len(survivors) + len(front) <= size:
            survivors.extend(front)
            continue
        crowd = np.array([pop[i].crowding for i in front])
        order = np.argsort(-crowd, kind="stable")
        need = size - len(survivors)
        survivors.extend(front[k] for k in order[:need])
        break
    return [pop[i] for i in survivors]


# ---------------------------------------------------------------------------
# variation operators


def sbx(x1: float, x2: float, eta_c: float, lo: float, hi: float,
        rng: np.random.Generator) -> tuple:
    """Bounded simulated binary crossover of one gene pair.

    The spread factor comes from the eta_c polynomial distribution; the
    children average to the parents' mean before clipping to [lo, hi].
    """
    u = float(rng.random())
    betaq = _sbx_betaq(u, eta_c)
    c1 = 0.5 * ((1.0 + betaq) * x1 + (1.0 - betaq) * x2)
    c2 = 0.5 * ((1.0 - betaq) * x1 + (1.0 + betaq) * x2)
    return (min(max(c1, lo), hi), min(max(c2, lo), hi))


def _sbx_betaq(u, eta_c):
    if u <= 0.5:
        return (2.0 * u) ** (1.0 / (eta_c + 1.0))
    return (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0))


def _sbx_arrays(x1, x2, eta_c, lo, hi, cross, u):
    """Vectorized SBX: genes where `cross` is False are copied through."""
    betaq = np.where(u <= 0.5,
                     (2.0 * u) ** (1.0 / (eta_c + 1.0)),
                     (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0)))
    c1 = 0.5 * ((1.0 + betaq) * x1 + (1.0 - betaq) * x2)
    c2 = 0.5 * ((1.0 - betaq) * x1 + (1.0 + betaq) * x2)
    c1 = np.clip(c1, lo, hi)
    c2 = np.clip(c2, lo, hi)
    return np.where(cross, c1, x1), np.where(cross, c2, x2)


def polynomial_mutation(x: float, eta_m: float, lo: float, hi: float,
                        p_mut: float, rng: np.random.Generator) -> float:
    """Bounded polynomial mutation of one gene (Deb's index-eta_m variant)."""
    if rng.random() >= p_mut:
        return x
    return _poly_mutate_value(x, float(rng.random()), eta_m, lo, hi)


def _poly_mutate_value(x, u, eta_m, lo, hi):
    span = hi - lo
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    mut_pow = 1.0 / (eta_m + 1.0)
    if u < 0.5:
        val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta_m + 1.0)
        dq = val ** mut_pow - 1.0
    else:
        val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta_m + 1.0)
        dq = 1.0 - val ** mut_pow
    return min(max(x + dq * span, lo), hi)


def _poly_mutate_arrays(x, eta_m, lo, hi, p_mut, rng):
    coins = rng.random(x.shape) < p_mut
    u = rng.random(x.shape)
    span = hi - lo
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    mut_pow = 1.0 / (eta_m + 1.0)
    low_branch = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta_m + 1.0)
    high_branch = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta_m + 1.0)
    dq = np.where(u < 0.5, low_branch ** mut_pow - 1.0, 1.0 - high_branch ** mut_pow)
    mutated = np.clip(x + dq * span, lo, hi)
    return np.where(coins, mutated, x)


def match_neurons(a: Genome, b: Genome) -> list:
    """Greedy without-replacement matching of prototype rows, a -> b.

    For each of a's rows in index order, pick the nearest not-yet-matched
    row of b (Euclidean distance, ties to the lowest index). Always a
    permutation; identical parents map to the identity.
    """
    d = np.linalg.norm(a.kohonen[:, None, :] - b.kohonen[None, :, :], axis=2)
    taken = np.zeros(d.shape[1], dtype=bool)
    out = []
    for i in range(d.shape[0]):
        row = np.where(taken, np.inf, d[i])
        j = int(np.argmin(row))
        taken[j] = True
        out.append(j)
    return out


def _mutate_outputs(genome: Genome, cfg: EvoConfig, rng) -> None:
    """Polynomial mutation on the output genes and slope (prototypes untouched)."""
    g = genome.grossberg.reshape(-1)
    genome.grossberg = _poly_mutate_arrays(
        g, cfg.eta_m, *controllers.GROSSBERG_BOUNDS, cfg.p_mut, rng
    ).reshape(genome.grossberg.shape)
    genome.slope = float(polynomial_mutation(
        genome.slope, cfg.eta_m, *controllers.SLOPE_BOUNDS, cfg.p_mut, rng))


def _crossover_ffnc(p1: Genome, p2: Genome, cfg: EvoConfig, p_cross: float, rng) -> tuple:
    """FFNC variation: per-gene SBX over the whole 163-vector, then mutation."""
    x1 = controllers.encode(p1)
    x2 = controllers.encode(p2)
    lo, hi = controllers.gene_bounds()
    cross = rng.random(x1.shape) < p_cross
    u = rng.random(x1.shape)
    c1, c2 = _sbx_arrays(x1, x2, cfg.eta_c, lo, hi, cross, u)
    c1 = _poly_mutate_arrays(c1, cfg.eta_m, lo, hi, cfg.p_mut, rng)
    c2 = _poly_mutate_arrays(c2, cfg.eta_m, lo, hi, cfg.p_mut, rng)
    return controllers.decode(c1), controllers.decode(c2)


def crossover_phase1(p1: Genome, p2: Genome, cfg: EvoConfig, rng) -> tuple:
    """Phase-1 variation. CPNC: prototype rows are copied bit-exact from the
    respective parent; output genes (and slope) are SBX-crossed gene-wise
    with probability p_cross_phase1 and then mutated."""
    if cfg.kind == FFNC:
        return _crossover_ffnc(p1, p2, cfg, cfg.p_cross_phase1, rng)
    c1 = p1.copy()
    c2 = p2.copy()
    glo, ghi = controllers.GROSSBERG_BOUNDS
    g1 = p1.grossberg.reshape(-1)
    g2 = p2.grossberg.reshape(-1)
    cross = rng.random(g1.shape) < cfg.p_cross_phase1
    u = rng.random(g1.shape)
    o1, o2 = _sbx_arrays(g1, g2, cfg.eta_c, glo, ghi, cross, u)
    c1.grossberg = o1.reshape(c1.grossberg.shape)
    c2.grossberg = o2.reshape(c2.grossberg.shape)
    if rng.random() < cfg.p_cross_phase1:
        c1.slope, c2.slope = sbx(p1.slope, p2.slope, cfg.eta_c,
                                 *controllers.SLOPE_BOUNDS, rng)
    _mutate_outputs(c1, cfg, rng)
    _mutate_outputs(c2, cfg, rng)
    return c1, c2


def crossover_phase2(p1: Genome, p2: Genome, cfg: EvoConfig, rng) -> tuple:
    """Phase-2 variation. CPNC: prototype rows are matched between parents;
    each matched pair independently crosses (50% by default) both its
    prototype rows and its output rows via SBX, so output genes move with
    the class they belong to. Prototype rows are never mutated."""
    if cfg.kind == FFNC:
        return _crossover_ffnc(p1, p2, cfg, cfg.p_cross_phase2, rng)
    m = match_neurons(p1, p2)
    c1 = p1.copy()
    c2 = p2.copy()
    klo, khi = controllers.KOHONEN_BOUNDS
    glo, ghi = controllers.GROSSBERG_BOUNDS
    cross_k = np.ones(controllers.N_INPUTS, dtype=bool)
    cross_g = np.ones(controllers.N_OUTPUTS, dtype=bool)
    for i, j in enumerate(m):
        if rng.random() >= cfg.p_cross_phase2:
            continue
        u = rng.random(controllers.N_INPUTS)
        k1, k2 = _sbx_arrays(p1.kohonen[i], p2.kohonen[j], cfg.eta_c, klo, khi,
                             cross_k, u)
        c1.kohonen[i] = k1
        c2.kohonen[j] = k2
        u = rng.random(controllers.N_OUTPUTS)
        o1, o2 = _sbx_arrays(p1.grossberg[i], p2.grossberg[j], cfg.eta_c, glo, ghi,
                             cross_g, u)
        c1.grossberg[i] = o1
        c2.grossberg[j] = o2
    if rng.random() < cfg.p_cross_phase2:
        c1.slope, c2.slope = sbx(p1.slope, p2.slope, cfg.eta_c,
                                 *controllers.SLOPE_BOUNDS, rng)
    _mutate_outputs(c1, cfg, rng)
    _mutate_outputs(c2, cfg, rng)
    return c1, c2


def make_offspring(pop: list, n: int, phase: int, cfg: EvoConfig, rng) -> list:
    """Breed n children by binary tournaments + the phase's crossover."""
    crossover = crossover_phase1 if phase == PHASE1 else crossover_phase2
    out = []
    while len(out) < n:
        i = tournament_select(pop, rng)
        j = tournament_select(pop, rng)
        c1, c2 = crossover(pop[i].genome, pop[j].genome, cfg, rng)
        out.append(Individual(c1))
        if len(out) < n:
            out.append(Individual(c2))
    return out


# ---------------------------------------------------------------------------
# two-phase driver


@dataclass
class _Context:
    cfg: EvoConfig
    maze: MazeSpec
    fit_cfg: FitnessConfig
    params: RobotParams
    sched: LearningSchedule

    def evaluate(self, inds: list, starts) -> None:
        for ind in inds:
            if ind.fitness is not None:
                continue
            fit, genome, results = fitness.evaluate(
                self.cfg.kind, ind.genome, self.maze, starts,
                self.fit_cfg, self.params, self.sched)
            ind.fitness = fit
            ind.reached = any(r.first_target_hit_step is not None for r in results)
            if self.cfg.lamarckian and self.cfg.kind == CPNC:
                ind.genome = genome

    def phase2_starts(self):
        if self.cfg.phase2_starts == "all":
            return self.maze.starts
        return (self.maze.starts[int(self.cfg.phase2_starts)],)


def _step_population(ctx: _Context, pop: list, starts, phase: int, rng) -> list:
    """One mu+lambda generation of a (sub)population."""
    if any(ind.fitness is None for ind in pop):
        ctx.evaluate(pop, starts)
        assign_ranks(pop, ctx.cfg.mode)
    offspring = make_offspring(pop, len(pop), phase, ctx.cfg, rng)
    ctx.evaluate(offspring, starts)
    return environmental_selection(pop + offspring, len(pop), ctx.cfg.mode)


def run_phase1(cfg: EvoConfig, maze: MazeSpec, group_rngs, initial: list,
               ctx: _Context, on_generation: Optional[Callable] = None) -> list:
    """Evolve the start-specific groups independently; returns group populations."""
    if len(maze.starts) < cfg.groups:
        raise ConfigError(
            f"maze has {len(maze.starts)} start poses but config wants {cfg.groups} groups")
    groups = [initial[g * cfg.group_size:(g + 1) * cfg.group_size]
              for g in range(cfg.groups)]
    for gen in range(1, cfg.phase1_gens + 1):
        for g in range(cfg.groups):
            starts = (maze.starts[g],)
            groups[g] = _step_population(ctx, groups[g], starts, PHASE1, group_rngs[g])
        if on_generation is not None:
            on_generation(gen, [ind for grp in groups for ind in grp])
    return groups


def run_phase2(groups: list, cfg: EvoConfig, maze: MazeSpec, rng,
               ctx: _Context, on_generation: Optional[Callable] = None) -> list:
    """Merge the groups and evolve the united population; returns it."""
    pop = [ind for grp in groups for ind in grp]
    starts = ctx.phase2_starts()
    # phase-2 fitness is over its own start protocol: force re-evaluation
    for ind in pop:
        ind.fitness = None
    for gen in range(cfg.phase1_gens + 1, cfg.phase1_gens + cfg.phase2_gens + 1):
        pop = _step_population(ctx, pop, starts, PHASE2, rng)
        if on_generation is not None:
            on_generation(gen, pop)
    return pop


def population_stats(gen: int, pop: list) -> GenStats:
    """Raw-objective summary of an evaluated population."""
    pts = np.array([ind.fitness for ind in pop], dtype=np.float64)
    front = metrics.nondominated(pts)
    return GenStats(
        gen=gen,
        best_f1=float(np.max(pts[:, 0])), median_f1=float(np.median(pts[:, 0])),
        best_f2=float(np.max(pts[:, 1])), median_f2=float(np.median(pts[:, 1])),
        s_measure=metrics.s_measure(pts[front]),
        reached_frac=sum(1 for ind in pop if ind.reached) / len(pop))


def run_evolution(cfg: EvoConfig, maze: MazeSpec,
                  fit_cfg: FitnessConfig = FitnessConfig(),
                  params: RobotParams = RobotParams(),
                  sched: LearningSchedule = LearningSchedule(),
                  initial_genomes: Optional[list] = None) -> RunResult:
    """Full two-phase run; a pure function of (config, maze).

    The master seed feeds one stream per phase-1 group, one for phase 2 and
    one for initialization, so results do not depend on scheduling. The
    returned RunResult carries per-generation statistics, the final
    evaluated population and its masked-dominance front.
    """
    cfg.validate()
    ctx = _Context(cfg, maze, fit_cfg, params, sched)
    ss = np.random.SeedSequence(cfg.seed)
    children = ss.spawn(cfg.groups + 2)
    init_rng = np.random.default_rng(children[0])
    group_rngs = [np.random.default_rng(c) for c in children[1:1 + cfg.groups]]
    phase2_rng = np.random.default_rng(children[-1])

    if initial_genomes is not None:
        if len(initial_genomes) != cfg.pop_size:
            raise ConfigError(
                f"initial population has {len(initial_genomes)} genomes, "
                f"config wants {cfg.pop_size}")
        pop0 = [Individual(g.copy()) for g in initial_genomes]
    else:
        pop0 = [Individual(controllers.random_genome(init_rng))
                for _ in range(cfg.pop_size)]

    stats: list = []

    def collect(gen, inds):
        stats.append(population_stats(gen, inds))

    groups = run_phase1(cfg, maze, group_rngs, pop0, ctx, on_generation=collect)
    final = run_phase2(groups, cfg, maze, phase2_rng, ctx, on_generation=collect)

    if any(ind.fitness is None for ind in final):  # zero-generation budgets
        ctx.evaluate(final, ctx.phase2_starts())
    fronts = assign_ranks(final, cfg.mode)
    return RunResult(config=cfg, gen_stats=stats, population=final, front=fronts[0])
