"""Genome codec and the two controller families.

A genome is 163 reals: a 9x16 winner-take-all clustering layer (class
prototypes in sensor space), a 9x2 output layer mapping the winning class
to wheel commands, and one sigmoid-slope gene. The counter-propagation
controller (CPNC) routes the input through its nearest prototype; the
feed-forward controller (FFNC) reinterprets the identical weight layout as
a dense 16-9-2 network so both families share one search space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

N_INPUTS = 16
N_CLASSES = 9
N_OUTPUTS = 2
GENOME_LEN = N_INPUTS * N_CLASSES + N_CLASSES * N_OUTPUTS + 1  # 163

CPNC = "cpnc"
FFNC = "ffnc"
KINDS = (CPNC, FFNC)

KOHONEN_BOUNDS = (0.0, 1.0)
GROSSBERG_BOUNDS = (-1.0, 1.0)
SLOPE_BOUNDS = (0.1, 10.0)
SLOPE_INIT = (0.5, 5.0)


@dataclass
class Genome:
    """Controller weights: kohonen (9, 16), grossberg (9, 2), slope > 0."""

    kohonen: np.ndarray
    grossberg: np.ndarray
    slope: float

    def copy(self) -> "Genome":
        return Genome(self.kohonen.copy(), self.grossberg.copy(), self.slope)


@dataclass(frozen=True)
class LearningSchedule:
    """Exponentially decaying within-episode clustering learning rate."""

    eta0: float = 0.3
    eta_end: float = 0.01
    horizon: int = 200

    @property
    def decay(self) -> float:
        return math.log(self.eta0 / self.eta_end) / self.horizon


def decode(flat) -> Genome:
    """Unpack a flat 163-vector; layout is [kohonen rows, grossberg rows, slope]."""
    arr = np.asarray(flat, dtype=np.float64)
    if arr.shape != (GENOME_LEN,):
        raise ValueError(f"genome must have exactly {GENOME_LEN} genes, got shape {arr.shape}")
    k_end = N_INPUTS * N_CLASSES
    g_end = k_end + N_CLASSES * N_OUTPUTS
    return Genome(
        kohonen=arr[:k_end].reshape(N_CLASSES, N_INPUTS).copy(),
        grossberg=arr[k_end:g_end].reshape(N_CLASSES, N_OUTPUTS).copy(),
        slope=float(arr[g_end]),
    )


def encode(genome: Genome) -> np.ndarray:
    """Inverse of decode; bit-exact round trip."""
    return np.concatenate([
        genome.kohonen.reshape(-1),
        genome.grossberg.reshape(-1),
        np.array([genome.slope], dtype=np.float64),
    ])


def winner(genome: Genome, s) -> int:
    """Index of the prototype row nearest to s; ties go to the lowest index."""
    return int(_kernels.winner_index(genome.kohonen, np.asarray(s, dtype=np.float64)))


def cpn_forward(genome: Genome, s):
    """(winner index, wl, wr): the winning class' output genes squashed
    through a slope-scaled sigmoid shifted into (-0.5, 0.5)."""
    k, wl, wr = _kernels.cpn_commands(genome.kohonen, genome.grossberg, genome.slope,
                                      np.asarray(s, dtype=np.float64))
    return int(k), float(wl), float(wr)


def ffn_forward(genome: Genome, s):
    """(wl, wr) of the dense-network reading of the same genome (no biases)."""
    wl, wr = _kernels.ffn_commands(genome.kohonen, genome.grossberg, genome.slope,
                                   np.asarray(s, dtype=np.float64))
    return float(wl), float(wr)


def forward(kind: str, genome: Genome, s):
    if kind == FFNC:
        return ffn_forward(genome, s)
    return cpn_forward(genome, s)[1:]


def kohonen_update(genome: Genome, s, eta: float) -> Genome:
    """Pull the winner prototype toward s by rate eta; other genes untouched."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"learning rate must be in [0, 1], got {eta}")
    s = np.asarray(s, dtype=np.float64)
    out = genome.copy()
    _kernels.kohonen_pull(out.kohonen, s, eta, _kernels.winner_index(out.kohonen, s))
    return out


def learning_rate(step: int, sched: LearningSchedule) -> float:
    """Rate at a 0-based episode step: eta0 at 0, eta_end at the horizon."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return sched.eta0 * math.exp(-sched.decay * step)


def random_genome(rng: np.random.Generator) -> Genome:
    """Fresh genome: prototypes uniform in sensor space, outputs in [-1, 1],
    slope in the moderate init band."""
    return Genome(
        kohonen=rng.uniform(0.0, 1.0, size=(N_CLASSES, N_INPUTS)),
        grossberg=rng.uniform(-1.0, 1.0, size=(N_CLASSES, N_OUTPUTS)),
        slope=float(rng.uniform(*SLOPE_INIT)),
    )


def check_genome(genome: Genome) -> None:
    """Raise unless all genome invariants hold (used by tests and operators)."""
    if genome.kohonen.shape != (N_CLASSES, N_INPUTS):
        raise ValueError(f"bad kohonen shape {genome.kohonen.shape}")
    if genome.grossberg.shape != (N_CLASSES, N_OUTPUTS):
        raise ValueError(f"bad grossberg shape {genome.grossberg.shape}")
    if not genome.slope > 0.0:
        raise ValueError(f"slope must be positive, got {genome.slope}")
    if np.any(genome.kohonen < KOHONEN_BOUNDS[0]) or np.any(genome.kohonen > KOHONEN_BOUNDS[1]):
        raise ValueError("kohonen genes out of [0, 1]")
    if np.any(genome.grossberg < GROSSBERG_BOUNDS[0]) or np.any(genome.grossberg > GROSSBERG_BOUNDS[1]):
        raise ValueError("grossberg genes out of [-1, 1]")


def gene_bounds() -> tuple:
    """(lower, upper) length-163 bound vectors matching the flat layout."""
    lo = np.empty(GENOME_LEN)
    hi = np.empty(GENOME_LEN)
    k_end = N_INPUTS * N_CLASSES
    g_end = k_end + N_CLASSES * N_OUTPUTS
    lo[:k_end], hi[:k_end] = KOHONEN_BOUNDS
    lo[k_end:g_end], hi[k_end:g_end] = GROSSBERG_BOUNDS
    lo[g_end], hi[g_end] = SLOPE_BOUNDS
    return lo, hi


def to_obj(kind: str, genome: Genome) -> dict:
    """JSON-ready controller record {kind, flat}; floats keep full precision."""
    return {"kind": kind, "flat": [float(v) for v in encode(genome)]}


def from_obj(obj: dict) -> tuple:
    kind = obj["kind"]
    if kind not in KINDS:
        raise ValueError(f"unknown controller kind {kind!r}")
    return kind, decode(obj["flat"])


def save_controller(path, kind: str, genome: Genome) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_obj(kind, genome), fh)
        fh.write("\n")


def load_controller(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        return from_obj(json.load(fh))
