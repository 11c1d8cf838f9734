import numpy as np
import pytest

from helpers import tiny_scenario
from saginmec.geometry import kinematic_residuals
from saginmec.latency import energy_efficiency, frame_energy, propulsion_power, residuals
from saginmec.optimizer import dinkelbach_alpha, dinkelbach_gap, initial_plan, optimize_trajectory
from saginmec.optimizer.bounds import surrogate_energy


def _grid_best(plan, cfg, v0, centre, half, m):
    """Best true EE over q1, q2 on an m^4 grid; the rest of the path follows
    from the pinned start velocity and the endpoints."""
    d = cfg.delta
    q0, q3 = np.asarray(cfg.q_uav_start, float), np.asarray(cfg.q_uav_end, float)
    g = np.linspace(-half, half, m)
    X1, Y1, X2, Y2 = np.meshgrid(g, g, g, g, indexing="ij")
    q1 = np.stack([X1.ravel(), Y1.ravel()], 1) + centre[0]
    q2 = np.stack([X2.ravel(), Y2.ravel()], 1) + centre[1]
    a0 = 2 * (q1 - q0 - v0 * d) / d ** 2
    v1 = v0 + a0 * d
    a1 = 2 * (q2 - q1 - v1 * d) / d ** 2
    v2 = v1 + a1 * d
    a2 = 2 * (q3 - q2 - v2 * d) / d ** 2
    v3 = v2 + a2 * d
    speeds = np.stack([np.linalg.norm(x, axis=1) for x in (v1, v2, v3)])
    accels = np.stack([np.linalg.norm(x, axis=1) for x in (a0, a1, a2)])
    ok = np.all(speeds <= cfg.v_max, 0) & np.all(accels <= cfg.a_max, 0) & np.all(speeds >= 0.1, 0)
    bits = plan.load.frame_bits()
    vs = (np.broadcast_to(v0, v1.shape), v1, v2)
    ee = sum(bits[n] / (d * propulsion_power(vs[n], a, cfg)) for n, a in enumerate((a0, a1, a2)))
    ee[~ok] = -np.inf
    for i in np.argsort(-ee)[:2000]:
        if not np.isfinite(ee[i]):
            break
        q = np.array([q0, q1[i], q2[i]])
        if residuals(plan.z, plan.load, plan.rates, q, cfg).min() >= -1e-9:
            return ee[i], (q1[i], q2[i])
    return -np.inf, None


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_k1_n3_matches_grid_search(seed):
    cfg = tiny_scenario(seed, K=1, N=3)
    plan = initial_plan(cfg)
    v0 = plan.traj.v[0]
    traj, _, _ = optimize_trajectory(plan, cfg, pin_initial_velocity=v0)
    ee = energy_efficiency(traj, plan.load, cfg)
    # coarse grid around the straight path, then zoom in on the incumbent
    best, centre, half = -np.inf, (plan.traj.q[1], plan.traj.q[2]), 150.0
    for _ in range(6):
        b, c = _grid_best(plan, cfg, v0, centre, half, 15)
        if b > best:
            best, centre = b, c
        half *= 0.35
    assert np.isfinite(best)
    assert ee >= 0.98 * best
    assert np.allclose(traj.v[0], v0)


def test_zero_bits_objective_stays_zero_and_energy_drops():
    cfg = tiny_scenario(3, K=2, N=4)
    plan = initial_plan(cfg)
    for f in ("B_S_in", "B_S_out", "B_priv_in", "B_priv_out"):
        getattr(plan.load, f)[:] = 0.0
    traj, _, trace = optimize_trajectory(plan, cfg)
    assert trace.objectives and all(o == 0.0 for o in trace.objectives)
    assert frame_energy(traj, cfg).sum() < frame_energy(plan.traj, cfg).sum()


@pytest.mark.parametrize("seed,K,N", [(4, 2, 4), (5, 3, 5), (6, 1, 6)])
def test_result_feasible_and_not_worse(seed, K, N):
    cfg = tiny_scenario(seed, K=K, N=N)
    plan = initial_plan(cfg)
    before = plan.objective(cfg)
    traj, state, trace = optimize_trajectory(plan, cfg)
    assert energy_efficiency(traj, plan.load, cfg) >= before
    assert kinematic_residuals(traj, cfg).feasible
    assert residuals(plan.z, plan.load, plan.rates, traj.frame_positions(), cfg).min() >= -1e-9
    # trace bookkeeping
    loops = state.sca_iterations
    assert loops >= 1
    assert len(trace.alpha_exits) == len(trace.warm_gaps) == len(trace.exit_gaps) == loops
    assert len(trace.expansion_points) == loops
    assert np.all(np.diff(trace.objectives) >= 0)
    assert all(0.0 <= f <= 1.0 for f in trace.step_fractions)
    assert state.inner_iterations >= loops
    assert len(trace.theta2) == loops and all(t > 0 for t in trace.theta2)


def test_warm_started_gap_is_nonnegative():
    cfg = tiny_scenario(7, K=2, N=5)
    plan = initial_plan(cfg)
    _, _, trace = optimize_trajectory(plan, cfg)
    assert min(trace.warm_gaps) >= -1e-8


def test_returned_alpha_is_closed_form_at_result():
    cfg = tiny_scenario(8, K=2, N=4)
    plan = initial_plan(cfg)
    traj, state, _ = optimize_trajectory(plan, cfg)
    bits = plan.load.frame_bits()
    N = cfg.N
    om = np.maximum(np.linalg.norm(traj.v[:N], axis=1), 0.1)
    alpha = dinkelbach_alpha(bits, traj.v[:N], traj.a, om, cfg)
    np.testing.assert_allclose(state.alpha, alpha, rtol=1e-12)
    # at the closed-form alpha the Dinkelbach gap vanishes
    E = surrogate_energy(traj.v[:N], traj.a, om, cfg)
    assert abs(dinkelbach_gap(alpha, bits, E)) <= 1e-9 * np.sum(bits / E)
