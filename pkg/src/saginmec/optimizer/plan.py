"""Plan and report containers shared by the optimisation stages."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..caching import CachePlan
from ..channel import LinkRates
from ..geometry import UAVTrajectory, kinematic_residuals
from ..latency import FrameLoad, energy_efficiency, epigraph_violation, residuals


@dataclass
class AllocationPlan:
    traj: UAVTrajectory
    load: FrameLoad
    z: np.ndarray          # (K, N) binary decisions, 1 = LEO
    z_relaxed: np.ndarray  # (K, N) relaxed decisions of the last offloading step
    cache: CachePlan
    rates: LinkRates

    def objective(self, cfg) -> float:
        return energy_efficiency(self.traj, self.load, cfg)

    def residuals(self, cfg) -> np.ndarray:
        return residuals(self.z, self.load, self.rates, self.traj.frame_positions(), cfg)

    def copy(self) -> "AllocationPlan":
        return AllocationPlan(self.traj.copy(), self.load.copy(), self.z.copy(),
                              self.z_relaxed.copy(), self.cache, self.rates)

    def audit(self, cfg) -> dict:
        kin = kinematic_residuals(self.traj, cfg)
        return {
            "min_residual_s": float(self.residuals(cfg).min()),
            "epigraph_violation_s": float(epigraph_violation(self.load, self.rates, cfg).max()),
            "kinematics_feasible": kin.feasible,
            "recursion_defect_m": kin.recursion_defect,
            "speed_excess_mps": kin.speed_excess,
            "accel_excess_mps2": kin.accel_excess,
        }

    def to_csv(self, cfg) -> str:
        res = self.residuals(cfg)
        L = self.load
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "device", "c", "z", "z_relaxed", "B_S_in", "B_S_out",
                    "B_priv_in", "B_priv_out", "T_ul", "T_dl", "residual_s"])
        for n in range(cfg.N):
            for k in range(cfg.K):
                w.writerow([n + 1, k + 1, int(L.c[k]), int(self.z[k, n]),
                            repr(float(self.z_relaxed[k, n])), repr(float(L.B_S_in[k, n])),
                            repr(float(L.B_S_out[n])), repr(float(L.B_priv_in[k, n])),
                            repr(float(L.B_priv_out[k, n])), repr(float(L.T_ul[n])),
                            repr(float(L.T_dl[n])), repr(float(res[k, n]))])
        return buf.getvalue()


@dataclass
class SCAState:
    q_exp: np.ndarray
    v_exp: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    sca_iterations: int = 0      # Q3
    inner_iterations: int = 0    # Q4, summed over SCA loops


@dataclass
class TrajectoryTrace:
    """Audit trail of one trajectory-stage call."""

    alpha_exits: list = field(default_factory=list)     # alpha at each SCA-loop exit
    warm_gaps: list = field(default_factory=list)       # gap of the first inner solve per loop
    exit_gaps: list = field(default_factory=list)       # gap at each inner-loop exit
    theta2: list = field(default_factory=list)
    expansion_points: list = field(default_factory=list)  # (q_exp (N+1,2), z (K,N))
    objectives: list = field(default_factory=list)      # true EE after each SCA loop
    step_fractions: list = field(default_factory=list)


@dataclass
class SolveReport:
    scheme: str
    objective_trace: list = field(default_factory=list)   # after each outer iteration
    stage_trace: list = field(default_factory=list)       # dict rows, see trace_csv
    outer_iterations: int = 0
    converged: bool = False
    Q1: int = 0
    Q2: int = 0
    Q3: int = 0
    Q4: int = 0
    wall_time_s: float = 0.0
    final_residuals: dict = field(default_factory=dict)
    trajectory_traces: list = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outer_iter", "stage", "objective_bits_per_J", "min_residual_s", "Q3", "Q4"])
        for r in self.stage_trace:
            w.writerow([r["outer_iter"], r["stage"], repr(float(r["objective"])),
                        repr(float(r["min_residual"])), r["Q3"], r["Q4"]])
        return buf.getvalue()
