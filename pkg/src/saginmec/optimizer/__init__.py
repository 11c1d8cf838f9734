"""Trajectory, bit and offloading stages and the alternating loop."""
from .ao import SCHEMES, alternating_optimize, initial_plan
from .bits import optimize_bits
from .bounds import (dinkelbach_alpha, dinkelbach_gap, dinkelbach_value, lemma2_psi,
                     taylor_dl_bound, taylor_ul_bound, velocity_lower_bound)
from .offloading import optimize_offloading
from .plan import AllocationPlan, SCAState, SolveReport, TrajectoryTrace
from .trajectory import optimize_trajectory

__all__ = [
    "SCHEMES", "alternating_optimize", "initial_plan", "optimize_bits", "optimize_offloading",
    "optimize_trajectory", "dinkelbach_alpha", "dinkelbach_gap", "dinkelbach_value",
    "lemma2_psi", "taylor_ul_bound", "taylor_dl_bound", "velocity_lower_bound",
    "AllocationPlan", "SCAState", "SolveReport", "TrajectoryTrace",
]
