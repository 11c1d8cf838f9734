import numpy as np
import pytest
from hypothesis import given, strategies as st

from saginmec.channel import private_downlink_rate, private_uplink_rate
from saginmec.geometry import leo_ground_track
from saginmec.optimizer.bounds import (dinkelbach_alpha, dinkelbach_value, lemma2_psi,
                                       surrogate_energy, taylor_dl_bound, taylor_ul_bound,
                                       velocity_lower_bound)

coord = st.floats(0, 10_000)


@given(k=st.integers(1, 8), n=st.integers(1, 60), z=st.sampled_from([0.0, 0.3, 0.8]),
       qx=coord, qy=coord)
def test_taylor_tangency(k, n, z, qx, qy):
    from saginmec.scenario import default_scenario

    cfg = default_scenario()
    q = np.array([qx, qy])
    assert taylor_ul_bound(k, n, q, q, z, cfg) == pytest.approx(
        private_uplink_rate(k, n, z, q, cfg), rel=1e-12)
    assert taylor_dl_bound(k, n, q, q, z, cfg) == pytest.approx(
        private_downlink_rate(k, n, z, q, cfg), rel=1e-12)


@given(k=st.integers(1, 8), n=st.integers(1, 60), z=st.floats(0, 0.99), qx=coord, qy=coord)
def test_taylor_underestimates_on_grid(k, n, z, qx, qy):
    from saginmec.scenario import default_scenario

    cfg = default_scenario()
    track = leo_ground_track(cfg)
    q_exp = np.array([qx, qy])
    for gx in np.linspace(0, 10_000, 10):
        for gy in np.linspace(0, 10_000, 10):
            q = np.array([gx, gy])
            true_ul = private_uplink_rate(k, n, z, q, cfg, track)
            true_dl = private_downlink_rate(k, n, z, q, cfg, track)
            assert taylor_ul_bound(k, n, q, q_exp, z, cfg, track) <= true_ul * (1 + 1e-12)
            assert taylor_dl_bound(k, n, q, q_exp, z, cfg, track) <= true_dl * (1 + 1e-12)


def test_taylor_leo_only_is_flat(cfg):
    a = taylor_ul_bound(2, 10, [0, 0], [5000, 5000], 1.0, cfg)
    b = taylor_ul_bound(2, 10, [9000, 1000], [5000, 5000], 1.0, cfg)
    assert a == b


@given(v=st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
       ve=st.tuples(st.floats(-50, 50), st.floats(-50, 50)))
def test_velocity_bound(v, ve):
    v, ve = np.array(v), np.array(ve)
    assert velocity_lower_bound(v, ve) <= v @ v + 1e-9
    assert velocity_lower_bound(ve, ve) == pytest.approx(ve @ ve)
    assert velocity_lower_bound(v, np.zeros(2)) == 0.0


def test_alpha_hand_value(cfg):
    alpha = dinkelbach_alpha(np.array([1e8]), np.array([[16.0, 0.0]]), np.zeros((1, 2)),
                             np.array([16.0]), cfg)
    assert alpha[0] == pytest.approx(1e4 / (9.26e-4 * 4096 + 2250 / 16))
    assert alpha[0] == pytest.approx(69.24, abs=0.01)
    zero = dinkelbach_alpha(np.zeros(1), np.array([[16.0, 0.0]]), np.zeros((1, 2)),
                            np.array([16.0]), cfg)
    assert zero[0] == 0.0
    with pytest.raises(ValueError):
        dinkelbach_alpha(np.ones(1), np.array([[16.0, 0.0]]), np.zeros((1, 2)),
                         np.array([0.01]), cfg)


@given(seed=st.integers(0, 5000))
def test_dinkelbach_identity_and_concavity(seed):
    from saginmec.scenario import default_scenario

    cfg = default_scenario()
    rng = np.random.default_rng(seed)
    N = 4
    bits = rng.uniform(1e7, 1e8, N)
    v = rng.uniform(5, 40, (N, 2))
    a = rng.uniform(-3, 3, (N, 2))
    om = np.linalg.norm(v, axis=1)
    E = surrogate_energy(v, a, om, cfg)
    star = dinkelbach_alpha(bits, v, a, om, cfg)
    assert dinkelbach_value(star, bits, v, a, om, cfg) == pytest.approx(np.sum(bits / E),
                                                                       rel=1e-12)
    assert dinkelbach_value(np.zeros(N), bits, v, a, om, cfg) == 0.0
    up = star * rng.uniform(1.01, 2.0, N)
    per = 2 * up * np.sqrt(bits) - up ** 2 * E
    assert np.all(per < bits / E)


@given(gamma=st.floats(1e-3, 1e3), B=st.floats(1e-2, 1e2), c1=st.floats(1e-3, 10),
       dc=st.floats(1e-3, 10))
def test_lemma2_convex_in_decision(gamma, B, c1, dc):
    x = np.linspace(0, 1, 101)
    psi = lemma2_psi(x, gamma, B, c1, c1 + dc)
    assert np.all(np.diff(psi, 2) >= -1e-9 * max(1.0, np.max(np.abs(psi))))
