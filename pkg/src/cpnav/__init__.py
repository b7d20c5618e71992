"""Neuroevolution of counter-propagation and feed-forward neuro-controllers
for simulated differential-drive robot maze navigation."""

__version__ = "0.1.0"

from .controllers import CPNC, FFNC, Genome, LearningSchedule
from .evolution import EvoConfig, RunResult, run_evolution
from .fitness import FitnessConfig, evaluate, run_episode
from .robot import RobotParams
from .world import MazeSpec, Pose, load_maze, save_maze

__all__ = [
    "CPNC", "FFNC", "Genome", "LearningSchedule", "EvoConfig", "RunResult",
    "run_evolution", "FitnessConfig", "evaluate", "run_episode", "RobotParams",
    "MazeSpec", "Pose", "load_maze", "save_maze", "__version__",
]
