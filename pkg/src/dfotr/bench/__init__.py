"""Benchmark harness: problem collection, contamination wrappers, profiles."""

from .baselines import fd_baseline
from .harness import ExperimentResult, run_cell, run_experiment, solved_fraction
from .problems import BenchProblem, collection
from .profiles import ProfileData, convergence_cost, profiles
from .wrappers import failing, noisy

__all__ = [
    "BenchProblem", "collection", "noisy", "failing",
    "convergence_cost", "profiles", "ProfileData", "fd_baseline",
    "run_experiment", "run_cell", "ExperimentResult", "solved_fraction",
]
