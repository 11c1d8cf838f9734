import numpy as np
import pytest

from helpers import tiny_scenario
from lp_oracle import enumerate_general, lp_rows
from saginmec.caching import scenario_indicators
from saginmec.convex_solver import solve_lp
from saginmec.errors import InfeasibleError
from saginmec.latency import min_load
from saginmec.optimizer import initial_plan, optimize_bits
from saginmec.optimizer.bits import MBIT, _frame_lp


def _long_frames(cfg, delta=1e6):
    # the UAV must stay above the fixed-wing speed floor and so ends up far
    # away; a near-stationary LEO ground track keeps the LEO link usable
    return cfg.replace(delta=delta, v_L=1e-6,
                       q_uav_end=cfg.q_uav_start + [0.3 * cfg.N * delta, 0.0])


@pytest.mark.parametrize("seed,huge", [(0, False), (1, False), (2, True), (3, True)])
def test_frame_lp_matches_vertex_oracle(seed, huge):
    cfg = tiny_scenario(seed, K=2, N=2)
    if huge:
        cfg = _long_frames(cfg)
    plan = initial_plan(cfg, scenario_indicators([0, 1], 2))
    r_ul, r_dl = plan.rates.private(plan.z, plan.traj.frame_positions(), cfg)
    for n in range(cfg.N):
        lp = _frame_lp(n, plan, cfg, r_ul, r_dl)
        sol = solve_lp(lp)
        G, h = lp_rows(lp)
        oracle, _ = enumerate_general(lp.c, G, h)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(oracle, rel=1e-7, abs=1e-7)


def test_optimized_bits_feasible_and_not_worse():
    cfg = tiny_scenario(4)
    plan = initial_plan(cfg)
    load = optimize_bits(plan, cfg)
    new = plan.copy()
    new.load = load
    assert new.residuals(cfg).min() >= -1e-9
    assert np.all(load.frame_bits() >= plan.load.frame_bits())
    assert np.all(load.B_priv_in >= cfg.B_min * (1 - 1e-12))
    assert new.objective(cfg) > plan.objective(cfg)


def test_huge_frame_only_time_budget_binds():
    cfg = _long_frames(tiny_scenario(5))
    plan = initial_plan(cfg)
    load = optimize_bits(plan, cfg)
    new = plan.copy()
    new.load = load
    # every device uses up its budget in every frame (up to LP tolerance)
    res = new.residuals(cfg)
    assert np.all(res <= 1e-6 * cfg.delta)
    assert np.all(load.B_priv_in > 100 * cfg.B_min)


def test_full_hit_keeps_shared_bits_fixed():
    cfg = tiny_scenario(6)
    plan = initial_plan(cfg, scenario_indicators([1, 1], 2))
    load = optimize_bits(plan, cfg)
    np.testing.assert_allclose(load.B_S_in, cfg.B_min)
    np.testing.assert_allclose(load.B_S_out, cfg.O_S * cfg.B_min)
    assert np.all(load.T_ul == 0)
    assert np.all(load.B_priv_in > cfg.B_min)


def test_fixed_min_private_bits():
    cfg = tiny_scenario(7, private_bits_mode="fixed_min")
    plan = initial_plan(cfg)
    load = optimize_bits(plan, cfg)
    np.testing.assert_allclose(load.B_priv_in, cfg.B_min)


def test_dead_link_reports_culprit():
    cfg = tiny_scenario(8)
    plan = initial_plan(cfg, scenario_indicators([1, 1], 2))
    # move device 2 out of range after the plan was built so only the LP sees it
    far = cfg.device_positions.copy()
    far[1] = [1e9, 1e9]
    dead = cfg.replace(device_positions=far)
    from saginmec.channel import LinkRates

    plan.rates = LinkRates.build(dead)
    plan.load = min_load(dead, plan.load.c, plan.rates)
    with pytest.raises(InfeasibleError) as exc:
        optimize_bits(plan, dead)
    # the multicast downlink runs at the weakest device's rate, so the dead
    # device drags every device of the first frame over budget with it
    assert (1, 0) in exc.value.culprits
    assert all(n == 0 for _, n in exc.value.culprits)
