"""Offloading stage: relaxed decision per (device, frame), then rounding.

With bits, latencies and trajectory fixed, the max-min latency margin over
z in [0, 1]^{K x N} separates into independent scalar problems. Each residual
is concave in z (reciprocals of log-affine rates plus a reciprocal-affine
compute term), so a golden-section search finds the relaxed optimum. Rounding
keeps the endpoint with the larger residual.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..channel import uav_gain_table
from ..errors import InfeasibleError

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
TOL = 1e-9


@dataclass
class OffloadingResult:
    z: np.ndarray          # binary (K, N)
    z_relaxed: np.ndarray  # (K, N)
    residual: np.ndarray   # (K, N) at the binary z
    relaxed_residual: np.ndarray


class DecisionModel:
    """Residual of every (k, n) as a function of its own decision."""

    def __init__(self, plan, cfg):
        L = plan.load
        K, N = cfg.K, cfg.N
        h_u = uav_gain_table(plan.traj.frame_positions(), cfg)
        h_l = plan.rates.h_leo
        su = K / (cfg.N0 * cfg.W_ul)
        sd = K / (cfg.N0 * cfg.W_dl)
        self.args = dict(
            bi=L.B_priv_in.ravel(), bo=L.B_priv_out.ravel(), vbar=L.V_bar.ravel(),
            fk=np.repeat(cfg.f_k, N).astype(float),
            su_l=(cfg.p_D * h_l * su).ravel(), su_u=(cfg.p_D * h_u * su).ravel(),
            sd_l=(cfg.p_L * h_l * sd).ravel(), sd_u=(cfg.p_U * h_u * sd).ravel())
        self.consts = (cfg.F_L, cfg.F_U, cfg.W_ul / K, cfg.W_dl / K)
        head = cfg.delta - L.T_ul - L.T_dl - L.V_S / (cfg.f_S * cfg.F_L)
        self.head = np.broadcast_to(head[None, :], (K, N)).ravel()
        self.shape = (K, N)

    def residual(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        z = z.ravel() if z.size == self.head.size else np.broadcast_to(z, self.head.shape)
        a = self.args
        FL, FU, wu, wd = self.consts
        lat = _kernels.decision_latency(z, a["bi"], a["bo"], a["vbar"], a["fk"], FL, FU,
                                        wu, a["su_l"], a["su_u"], wd, a["sd_l"], a["sd_u"])
        return self.head - lat


def _golden_max(f, n, iters=80):
    lo, hi = np.zeros(n), np.ones(n)
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        left = f1 >= f2  # maximum lies in [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = hi - GOLDEN * (hi - lo)
        nx2 = lo + GOLDEN * (hi - lo)
        x1, x2 = nx1, nx2
        f1, f2 = f(x1), f(x2)
    return 0.5 * (lo + hi)


def optimize_offloading(plan, cfg) -> OffloadingResult:
    model = DecisionModel(plan, cfg)
    K, N = model.shape
    z_rel = _golden_max(model.residual, K * N)
    # endpoints can be optimal for a concave function on [0, 1]
    r_rel = model.residual(z_rel)
    r0 = model.residual(0.0)
    r1 = model.residual(1.0)
    use0 = r0 > r_rel
    use1 = r1 > np.maximum(r_rel, r0)
    z_rel = np.where(use1, 1.0, np.where(use0, 0.0, z_rel))
    r_rel = model.residual(z_rel)

    current = plan.z.ravel()
    z = np.where(r1 > r0, 1, np.where(r0 > r1, 0, current)).astype(int)
    r_bin = np.where(z == 1, r1, r0)
    # repair sweep: flip any infeasible entry to the other endpoint
    bad = r_bin < -TOL
    if np.any(bad):
        z = np.where(bad, 1 - z, z)
        r_bin = np.where(z == 1, r1, r0)
        still = r_bin < -TOL
        if np.any(still):
            idx = np.flatnonzero(still)
            culprits = [(int(i // N), int(i % N)) for i in idx]
            if np.max(r_rel[still]) < -TOL:
                raise InfeasibleError("no decision in [0, 1] meets the latency budget", culprits)
            raise InfeasibleError("rounding could not keep every frame feasible", culprits)
    return OffloadingResult(z.reshape(K, N), z_rel.reshape(K, N), r_bin.reshape(K, N),
                            r_rel.reshape(K, N))
