"""Alternating optimisation over trajectory, bits and offloading decisions."""
from __future__ import annotations

import time

import numpy as np

from ..caching import place_cache, scenario_indicators
from ..channel import LinkRates
from ..errors import InfeasibleError, ZeroSpeedError
from ..geometry import straight_line_trajectory
from ..latency import min_load, residuals
from .bits import optimize_bits
from .offloading import optimize_offloading
from .plan import AllocationPlan, SolveReport
from .trajectory import optimize_trajectory

# which stages each scheme runs, and whether the cache is used
SCHEMES = {
    "JO-C": dict(trajectory=True, bits=True, offloading=True, cache=True),
    "NTO-C": dict(trajectory=False, bits=True, offloading=True, cache=True),
    "NBO-C": dict(trajectory=True, bits=False, offloading=True, cache=True),
    "NOO-C": dict(trajectory=True, bits=True, offloading=False, cache=True),
    "JO-NC": dict(trajectory=True, bits=True, offloading=True, cache=False),
}
FEAS_TOL = 1e-9


def initial_plan(cfg, cache=None) -> AllocationPlan:
    """Straight-line trajectory, minimum bits, and the LEO for every private
    task whose latency budget allows it (the UAV otherwise)."""
    if cache is None:
        cache = place_cache(cfg)
    traj = straight_line_trajectory(cfg)
    if np.any(np.linalg.norm(traj.v, axis=1) < 0.1):
        raise ZeroSpeedError("straight-line start hovers below the speed floor")
    rates = LinkRates.build(cfg)
    load = min_load(cfg, cache.c, rates)
    q = traj.frame_positions()
    r1 = residuals(np.ones((cfg.K, cfg.N)), load, rates, q, cfg)
    r0 = residuals(np.zeros((cfg.K, cfg.N)), load, rates, q, cfg)
    z = np.where(r1 >= -FEAS_TOL, 1, 0)
    bad = (r1 < -FEAS_TOL) & (r0 < -FEAS_TOL)
    if np.any(bad):
        kk, nn = np.nonzero(bad)
        raise InfeasibleError(
            f"{int(bad.sum())} (device, frame) pairs miss the latency budget at minimum bits",
            list(zip(kk.tolist(), nn.tolist())))
    return AllocationPlan(traj, load, z, z.astype(float), cache, rates)


def _row(report, it, stage, plan, cfg, q3=0, q4=0):
    report.stage_trace.append(dict(outer_iter=it, stage=stage, objective=plan.objective(cfg),
                                   min_residual=float(plan.residuals(cfg).min()), Q3=q3, Q4=q4))


def alternating_optimize(cfg, scheme="JO-C", eps=1e-3, max_outer=15, fixed_z=None):
    """Run the alternating loop for ``scheme``; returns (plan, SolveReport).

    Stops when the fractional objective increase of an outer iteration drops
    below ``eps`` or after ``max_outer`` iterations.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    free = SCHEMES[scheme]
    t0 = time.perf_counter()
    cache = place_cache(cfg) if free["cache"] else scenario_indicators(np.zeros(cfg.K, int), cfg.K)
    plan = initial_plan(cfg, cache)
    if fixed_z is not None:
        plan.z = np.asarray(fixed_z, int).copy()
        plan.z_relaxed = plan.z.astype(float)
        if plan.residuals(cfg).min() < -FEAS_TOL:
            raise InfeasibleError("fixed decisions violate the latency budget at the start")
    report = SolveReport(scheme)
    obj = plan.objective(cfg)
    report.objective_trace.append(obj)
    _row(report, 0, "init", plan, cfg)

    for it in range(1, max_outer + 1):
        prev = obj
        if free["trajectory"]:
            traj, state, ttrace = optimize_trajectory(plan, cfg)
            cand = plan.copy()
            cand.traj = traj
            if cand.objective(cfg) >= plan.objective(cfg):
                plan = cand
            report.trajectory_traces.append(ttrace)
            report.Q3 += state.sca_iterations
            report.Q4 += state.inner_iterations
            _row(report, it, "trajectory", plan, cfg, state.sca_iterations, state.inner_iterations)
        if free["bits"]:
            load = optimize_bits(plan, cfg)
            cand = plan.copy()
            cand.load = load
            if cand.objective(cfg) >= plan.objective(cfg) and cand.residuals(cfg).min() >= -FEAS_TOL:
                plan = cand
            report.Q1 += 1
            _row(report, it, "bits", plan, cfg)
        if free["offloading"]:
            res = optimize_offloading(plan, cfg)
            plan = plan.copy()
            plan.z = res.z
            plan.z_relaxed = res.z_relaxed
            report.Q2 += 1
            _row(report, it, "offloading", plan, cfg)
        obj = plan.objective(cfg)
        report.objective_trace.append(obj)
        report.outer_iterations = it
        gain = (obj - prev) / prev if prev > 0 else (np.inf if obj > prev else 0.0)
        if gain < eps:
            report.converged = True
            break
    report.wall_time_s = time.perf_counter() - t0
    report.final_residuals = plan.audit(cfg)
    return plan, report
