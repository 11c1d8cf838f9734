"""Bit-allocation stage: one small LP per frame.

With the trajectory and decisions fixed the objective separates over frames
and each frame's energy is a constant, so every frame maximises its delivered
bits subject to the shared-phase epigraph rows and the per-device latency
budget. Variables per frame are the shared inputs, the private inputs and the
two shared-phase latencies, in Mbit and seconds.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..convex_solver import LinearProgram, solve_lp
from ..errors import InfeasibleError
from ..latency import build_load, min_load, residuals

MBIT = 1e6


def _frame_lp(n, plan, cfg, r_ul, r_dl):
    K = cfg.K
    c = plan.load.c
    miss = np.flatnonzero(c == 0)
    M = miss.size
    rates = plan.rates
    z = plan.z[:, n].astype(float)
    bmin = cfg.B_min / MBIT
    iS, iP, iTu, iTd = 0, K, 2 * K, 2 * K + 1
    nvar = 2 * K + 2

    # shared output per unit shared input of a miss device
    if M == 0:
        out_coef = 0.0
        out_const = cfg.O_S * bmin
    elif cfg.shared_output_mode == "sum":
        out_coef, out_const = cfg.O_S, 0.0
    else:
        out_coef, out_const = cfg.O_S / M, 0.0

    obj = np.zeros(nvar)
    obj[iS + miss] = K * out_coef
    obj[iP:iP + K] = cfg.O_bar

    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for k in miss:  # shared uplink epigraph
        rows += [r, r]
        cols += [iS + k, iTu]
        vals += [MBIT / rates.shared_ul[k, n], -1.0]
        rhs.append(0.0)
        r += 1
    # shared downlink epigraph
    for k in miss:
        rows.append(r)
        cols.append(iS + k)
        vals.append(out_coef * MBIT / rates.shared_dl_min[n])
    rows.append(r)
    cols.append(iTd)
    vals.append(-1.0)
    rhs.append(-out_const * MBIT / rates.shared_dl_min[n])
    r += 1
    # per-device latency budget
    cpu = cfg.f_k * (z * cfg.F_L + (1 - z) * cfg.F_U)
    per_bit = MBIT * (1.0 / r_ul[:, n] + cfg.eps_private / cpu + cfg.O_bar / r_dl[:, n])
    shared_exec = MBIT * cfg.eps_shared / (cfg.f_S * cfg.F_L)
    for k in range(K):
        rows += [r, r, r]
        cols += [iP + k, iTu, iTd]
        vals += [per_bit[k], 1.0, 1.0]
        for j in miss:
            rows.append(r)
            cols.append(iS + j)
            vals.append(shared_exec)
        rhs.append(cfg.delta)
        r += 1
    A_ub = sp.csr_matrix((vals, (rows, cols)), shape=(r, nvar))

    bounds = []
    for k in range(K):
        bounds.append((bmin, None) if c[k] == 0 else (bmin, bmin))
    for k in range(K):
        bounds.append((bmin, bmin) if cfg.private_bits_mode == "fixed_min" else (bmin, None))
    bounds += [(0.0, None), (0.0, None)]

    A_eq = b_eq = None
    if cfg.shared_output_mode == "equal_input" and M > 1:
        eq_rows = [(iS + miss[0], iS + k) for k in miss[1:]]
        A_eq = sp.csr_matrix((np.tile([1.0, -1.0], len(eq_rows)),
                              (np.repeat(np.arange(len(eq_rows)), 2), np.ravel(eq_rows))),
                             shape=(len(eq_rows), nvar))
        b_eq = np.zeros(len(eq_rows))
    return LinearProgram(obj, A_ub, np.array(rhs), A_eq, b_eq, bounds, maximize=True)


def _culprits(plan, cfg):
    base = min_load(cfg, plan.load.c, plan.rates)
    res = residuals(plan.z, base, plan.rates, plan.traj.frame_positions(), cfg)
    kk, nn = np.nonzero(res < 0)
    return [(int(k), int(n)) for k, n in zip(kk, nn)]


def optimize_bits(plan, cfg):
    """Return a FrameLoad maximising delivered bits frame by frame.

    Shared-phase latencies are set to the bounds implied by the bits. Frames
    where the LP does not beat the incumbent keep the incumbent bits.
    """
    r_ul, r_dl = plan.rates.private(plan.z, plan.traj.frame_positions(), cfg)
    B_S = plan.load.B_S_in.copy()
    B_P = plan.load.B_priv_in.copy()
    old_bits = plan.load.frame_bits()
    status = []
    for n in range(cfg.N):
        sol = solve_lp(_frame_lp(n, plan, cfg, r_ul, r_dl))
        status.append(sol.status)
        if sol.status == "infeasible":
            bad = [cp for cp in _culprits(plan, cfg) if cp[1] == n]
            raise InfeasibleError(
                f"minimum-bit constraints unsatisfiable in frame {n + 1}", bad)
        if sol.status != "optimal":
            continue
        x = np.maximum(sol.x * MBIT, cfg.B_min)
        B_S[:, n] = x[: cfg.K]
        B_P[:, n] = x[cfg.K: 2 * cfg.K]
    load = build_load(cfg, plan.load.c, B_S, B_P, plan.rates)
    load = _repair(load, plan, cfg, r_ul, r_dl)
    new_bits = load.frame_bits()
    worse = new_bits < old_bits
    if np.any(worse):
        B_S[:, worse] = plan.load.B_S_in[:, worse]
        B_P[:, worse] = plan.load.B_priv_in[:, worse]
        load = build_load(cfg, plan.load.c, B_S, B_P, plan.rates)
    return load


def _repair(load, plan, cfg, r_ul, r_dl):
    """Shave private bits where LP round-off left a tiny negative residual."""
    res = residuals(plan.z, load, plan.rates, plan.traj.frame_positions(), cfg)
    if res.min() >= 0:
        return load
    z = plan.z
    cpu = cfg.f_k[:, None] * (z * cfg.F_L + (1 - z) * cfg.F_U)
    per_bit = 1.0 / r_ul + cfg.eps_private / cpu + cfg.O_bar / r_dl
    B_P = load.B_priv_in.copy()
    neg = res < 0
    B_P[neg] = np.maximum(B_P[neg] + res[neg] / per_bit[neg] * (1 + 1e-9), cfg.B_min)
    return build_load(cfg, load.c, load.B_S_in, B_P, plan.rates)
