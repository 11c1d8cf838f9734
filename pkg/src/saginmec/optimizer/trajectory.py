"""Trajectory stage: SCA outer loop around a Dinkelbach inner loop.

Each inner step minimises sum_n alpha_n^2 E_n(v, a, omega) over the trajectory
with bits, shared latencies and decisions held fixed. Private rates enter the
latency rows through tangent lower bounds at the current expansion point, and
the induced-power speed is replaced by a slack omega bounded by the tangent of
|v|^2.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..convex_solver import Atom, ConvexSubproblem, project_affine, solve_convex
from ..errors import InfeasibleError
from ..geometry import UAVTrajectory
from ..latency import SPEED_FLOOR, energy_efficiency, residuals
from .bounds import (dinkelbach_alpha, dinkelbach_gap, link_constants,
                     surrogate_energy, tangent_coefficients)
from .plan import SCAState, TrajectoryTrace

SCA_MOVE_TOL_M = 1.0
SCA_MAX_ITER = 30
INNER_MAX_ITER = 20
THETA2_REL = 1e-4
HALVINGS = 12


class _Layout:
    """Index map of the stacked variable vector [q, v, a, omega]."""

    def __init__(self, N):
        self.N = N
        self.q0 = 0
        self.v0 = 2 * (N + 1)
        self.a0 = 4 * (N + 1)
        self.w0 = 4 * (N + 1) + 2 * N
        self.n = 7 * N + 4

    def q(self, i):
        return self.q0 + 2 * i + np.arange(2)

    def v(self, i):
        return self.v0 + 2 * i + np.arange(2)

    def a(self, i):
        return self.a0 + 2 * i + np.arange(2)

    def pack(self, traj, om):
        return np.concatenate([traj.q.ravel(), traj.v.ravel(), traj.a.ravel(), om])

    def unpack(self, x):
        N = self.N
        q = x[self.q0:self.v0].reshape(N + 1, 2)
        v = x[self.v0:self.a0].reshape(N + 1, 2)
        a = x[self.a0:self.w0].reshape(N, 2)
        return UAVTrajectory(q.copy(), v.copy(), a.copy()), x[self.w0:].copy()

    def scale(self):
        s = np.empty(self.n)
        s[self.q0:self.v0] = 1000.0
        s[self.v0:self.a0] = 10.0
        s[self.a0:self.w0] = 1.0
        s[self.w0:] = 10.0
        return s


def _equalities(L: _Layout, cfg, v_init=None):
    N, d = L.N, cfg.delta
    rows, cols, vals, rhs = [], [], [], []
    r = 0

    def add(entries, b):
        nonlocal r
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(b)
        r += 1

    for j in range(2):
        add([(L.q(0)[j], 1e-3)], 1e-3 * cfg.q_uav_start[j])
        add([(L.q(N)[j], 1e-3)], 1e-3 * cfg.q_uav_end[j])
    for i in range(N):
        for j in range(2):
            # position recursion, divided by delta
            add([(L.q(i + 1)[j], 1.0 / d), (L.q(i)[j], -1.0 / d),
                 (L.v(i)[j], -1.0), (L.a(i)[j], -0.5 * d)], 0.0)
            add([(L.v(i + 1)[j], 1.0), (L.v(i)[j], -1.0), (L.a(i)[j], -d)], 0.0)
    if v_init is not None:
        for j in range(2):
            add([(L.v(0)[j], 1.0)], float(v_init[j]))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, L.n))
    return A, np.array(rhs)


def _sqnorm_atom(support, limit2, name):
    def fn(xs):
        m = xs.shape[0]
        val = np.sum(xs * xs, axis=1) - limit2
        hess = np.broadcast_to(2.0 * np.eye(2), (m, 2, 2)).copy()
        return val, 2.0 * xs, hess
    return Atom(support, fn, name, scale=limit2)


def _slack_atom(support, v_exp, scale):
    # omega^2 - (2 v_exp.v - |v_exp|^2) <= 0, support (vx, vy, omega)
    ve2 = np.sum(v_exp * v_exp, axis=1)

    def fn(xs):
        m = xs.shape[0]
        val = xs[:, 2] ** 2 - (2.0 * np.sum(v_exp * xs[:, :2], axis=1) - ve2)
        grad = np.empty((m, 3))
        grad[:, :2] = -2.0 * v_exp
        grad[:, 2] = 2.0 * xs[:, 2]
        hess = np.zeros((m, 3, 3))
        hess[:, 2, 2] = 2.0
        return val, grad, hess
    return Atom(support, fn, "velocity_slack", scale=scale)


def _energy_atom(support, w, cfg):
    kap = cfg.lambda2 / cfg.g_const ** 2

    def fn(xs):
        return _kernels.energy_rows(xs[:, 0:2], xs[:, 2:4], xs[:, 4], w,
                                    cfg.lambda1, cfg.lambda2, kap)
    return Atom(support, fn, "propulsion")


def latency_budget(plan, cfg):
    """Part of the per-device budget that does not depend on the UAV position."""
    L = plan.load
    z = plan.z
    cpu = cfg.f_k[:, None] * (z * cfg.F_L + (1 - z) * cfg.F_U)
    return (cfg.delta - L.T_ul[None, :] - L.T_dl[None, :] - L.V_bar / cpu
            - (L.V_S / (cfg.f_S * cfg.F_L))[None, :])


def _latency_atom(L: _Layout, plan, cfg, q_exp):
    """Rows for every (device, frame) whose private link involves the UAV."""
    z = plan.z.astype(float)
    budget = latency_budget(plan, cfg)
    kk, nn = np.nonzero(z < 1.0 - 1e-12)
    keep = nn >= 1  # frame 1 sits at the fixed start point
    kk, nn = kk[keep], nn[keep]
    if kk.size == 0:
        return None
    p = cfg.device_positions[kk]
    h = plan.rates.h_leo[kk, nn]
    s0 = np.sum((q_exp[nn] - p) ** 2, axis=1)
    Au, gu, wu = link_constants(z[kk, nn], h, cfg, "ul")
    Ad, gd, wd = link_constants(z[kk, nn], h, cfg, "dl")
    r0u, c1u = tangent_coefficients(s0, Au, gu, wu, cfg.H_U)
    r0d, c1d = tangent_coefficients(s0, Ad, gd, wd, cfg.H_U)
    bu = plan.load.B_priv_in[kk, nn]
    bd = plan.load.B_priv_out[kk, nn]
    bud = budget[kk, nn]
    support = np.stack([L.q(n) for n in nn])

    def fn(xs):
        return _kernels.latency_rows(xs, p, s0, r0u, c1u, bu, r0d, c1d, bd, bud)
    return Atom(support, fn, "private_latency", scale=cfg.delta)


def _build(L, plan, cfg, weights, q_exp, v_exp, A_eq, b_eq):
    N = L.N
    sup_e = np.stack([np.concatenate([L.v(i), L.a(i), [L.w0 + i]]) for i in range(N)])
    cons = [
        _sqnorm_atom(np.stack([L.v(i) for i in range(N + 1)]), cfg.v_max ** 2, "speed"),
        _sqnorm_atom(np.stack([L.a(i) for i in range(N)]), cfg.a_max ** 2, "acceleration"),
        _slack_atom(np.stack([np.concatenate([L.v(i), [L.w0 + i]]) for i in range(N)]),
                    v_exp[:N], cfg.v_max ** 2),
    ]
    lat = _latency_atom(L, plan, cfg, q_exp)
    if lat is not None:
        cons.append(lat)
    A_ub = sp.csr_matrix((-np.ones(N), (np.arange(N), L.w0 + np.arange(N))), shape=(N, L.n))
    b_ub = np.full(N, -SPEED_FLOOR)
    return ConvexSubproblem(L.n, objective=[_energy_atom(sup_e, weights, cfg)],
                            constraints=cons, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                            x_scale=L.scale(), name="trajectory")


def _restore(L, x, A_eq, b_eq, v_exp):
    """Remove the solver's equality drift, then pull omega back under its
    slack bound (the projection may move v by a few micrometres per second)."""
    N = L.N
    x = project_affine(A_eq, b_eq, x, L.scale())
    v = x[L.v0:L.a0].reshape(N + 1, 2)[:N]
    cap = 2.0 * np.sum(v_exp[:N] * v, axis=1) - np.sum(v_exp[:N] ** 2, axis=1)
    om = x[L.w0:]
    x[L.w0:] = np.where(cap > SPEED_FLOOR ** 2, np.minimum(om, np.sqrt(np.maximum(cap, 0.0))), om)
    return x


def _true_objective(traj, plan, cfg):
    return energy_efficiency(traj, plan.load, cfg)


def optimize_trajectory(plan, cfg, pin_initial_velocity=None, sca_max_iter=SCA_MAX_ITER,
                        move_tol=SCA_MOVE_TOL_M, inner_max_iter=INNER_MAX_ITER):
    """Improve the UAV trajectory of ``plan`` with everything else fixed.

    Returns ``(trajectory, SCAState, TrajectoryTrace)``; the trajectory's energy
    efficiency is never below the input's.
    """
    N = cfg.N
    L = _Layout(N)
    bits = plan.load.frame_bits()
    traj = plan.traj.copy()
    if pin_initial_velocity is None and cfg.uav_initial_speed is not None:
        pin_initial_velocity = traj.v[0]
    A_eq, b_eq = _equalities(L, cfg, pin_initial_velocity)

    om = np.maximum(np.linalg.norm(traj.v[:N], axis=1), SPEED_FLOOR)
    alpha = dinkelbach_alpha(bits, traj.v[:N], traj.a, om, cfg)
    obj = _true_objective(traj, plan, cfg)
    trace = TrajectoryTrace()
    state = SCAState(traj.q.copy(), traj.v.copy(), om.copy(), alpha.copy())
    base_res = residuals(plan.z, plan.load, plan.rates, traj.frame_positions(), cfg)

    for sca in range(sca_max_iter):
        # expand at the equality-projected point so the slack rows start tight
        x_start = project_affine(A_eq, b_eq, L.pack(traj, np.zeros(N)), L.scale())
        x_start[L.w0:] = np.maximum(np.linalg.norm(x_start[L.v0:L.a0].reshape(N + 1, 2)[:N],
                                                   axis=1), SPEED_FLOOR)
        proj, _ = L.unpack(x_start)
        q_exp, v_exp = proj.q.copy(), proj.v.copy()
        trace.expansion_points.append((q_exp, plan.z.copy()))
        x = x_start.copy()
        ratio_scale = max(float(np.sum(bits / surrogate_energy(traj.v[:N], traj.a, x[L.w0:], cfg))),
                          1e-300)
        theta2 = THETA2_REL * ratio_scale
        trace.theta2.append(theta2)
        for inner in range(inner_max_iter):
            w = alpha ** 2
            w = w + 1e-12 * max(float(w.max()), 0.0) if w.max() > 0 else np.ones(N)
            w = w / w.max()
            prob = _build(L, plan, cfg, w, q_exp, v_exp, A_eq, b_eq)
            try:
                sol = solve_convex(prob, x)
            except InfeasibleError as exc:
                raise InfeasibleError(f"trajectory subproblem rejected its start: {exc}") from exc
            x = _restore(L, sol.x, A_eq, b_eq, v_exp)
            t_new, om_new = L.unpack(x)
            E = surrogate_energy(t_new.v[:N], t_new.a, om_new, cfg)
            gap = dinkelbach_gap(alpha, bits, E)
            stalled = False
            if inner == 0:
                # the start is feasible for this subproblem, so never report
                # less than what it already achieves
                t0, om0 = L.unpack(x_start)
                E0 = surrogate_energy(t0.v[:N], t0.a, om0, cfg)
                gap0 = dinkelbach_gap(alpha, bits, E0)
                if gap < gap0:
                    x, E, gap, stalled = x_start.copy(), E0, gap0, True
                trace.warm_gaps.append(gap)
            state.inner_iterations += 1
            alpha = np.sqrt(bits) / E
            if gap <= theta2 or stalled:
                break
        trace.exit_gaps.append(gap)
        trace.alpha_exits.append(alpha.copy())
        state.sca_iterations += 1

        cand, _ = L.unpack(x)
        # full step first, then halve towards the expansion point until the
        # true objective does not drop and the true latency rows hold
        frac = 1.0
        accepted = None
        for _ in range(HALVINGS):
            trial_x = x_start + frac * (x - x_start)
            trial, _ = L.unpack(trial_x)
            trial_obj = _true_objective(trial, plan, cfg)
            res = residuals(plan.z, plan.load, plan.rates, trial.frame_positions(), cfg)
            if trial_obj >= obj and res.min() >= min(base_res.min(), 0.0) - 1e-9:
                accepted = trial
                break
            frac *= 0.5
        trace.step_fractions.append(frac if accepted is not None else 0.0)
        if accepted is None:
            trace.objectives.append(obj)
            break
        move = float(np.max(np.linalg.norm(accepted.q - q_exp, axis=1)))
        traj = accepted
        obj = _true_objective(traj, plan, cfg)
        trace.objectives.append(obj)
        state.q_exp, state.v_exp = q_exp, v_exp
        state.omega = np.maximum(np.linalg.norm(traj.v[:N], axis=1), SPEED_FLOOR)
        # the next loop starts from the accepted (possibly halved) step
        alpha = dinkelbach_alpha(bits, traj.v[:N], traj.a, state.omega, cfg)
        state.alpha = alpha.copy()
        if move < move_tol:
            break
    return traj, state, trace
