"""Quantum speed limits under continuous measurement modeled by H = H0 - i H1."""

__version__ = "0.1.0"

from .dynamics import SplitHamiltonian, Trajectory, evolve, evolve_commuting, evolve_exp, evolve_rk4
from .geometry import (
    QslReport,
    average_speed,
    geodesic_distance,
    qsl_time,
    speed_from_operators,
    speed_from_trajectory,
    speeds_from_operators,
)
from .measurement import MeasurementSpec, build_h1, small_time_speed, split_hamiltonian, zeno_prediction

__all__ = [
    "MeasurementSpec",
    "QslReport",
    "SplitHamiltonian",
    "Trajectory",
    "average_speed",
    "build_h1",
    "evolve",
    "evolve_commuting",
    "evolve_exp",
    "evolve_rk4",
    "geodesic_distance",
    "qsl_time",
    "small_time_speed",
    "speed_from_operators",
    "speed_from_trajectory",
    "speeds_from_operators",
    "split_hamiltonian",
    "zeno_prediction",
]
