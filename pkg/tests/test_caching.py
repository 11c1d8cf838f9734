import numpy as np
import pytest
from hypothesis import given, strategies as st

from saginmec.caching import (place_cache, scenario_indicators, zipf_popularity,
                              zipf_popularity_vector)


def test_zipf_hand_values():
    # 1, 2^-0.6, 3^-0.6 normalised
    w = [1.0, 2 ** -0.6, 3 ** -0.6]
    hand = [x / sum(w) for x in w]
    got = [zipf_popularity(f, 3, 0.6) for f in (1, 2, 3)]
    np.testing.assert_allclose(got, hand, rtol=1e-12)
    np.testing.assert_allclose(got, [0.4594, 0.3031, 0.2376], atol=1e-3)


def test_zipf_flat():
    np.testing.assert_allclose(zipf_popularity_vector(5, 0.0), 0.2)


def test_zipf_bad_index():
    with pytest.raises(ValueError):
        zipf_popularity(4, 3, 0.6)


@given(F=st.integers(1, 40), rho=st.floats(0, 4))
def test_zipf_is_a_distribution(F, rho):
    p = zipf_popularity_vector(F, rho)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(np.diff(p) <= 1e-15)


def test_default_placement(cfg):
    plan = place_cache(cfg)
    assert plan.cached_files == frozenset({1, 2})
    np.testing.assert_array_equal(plan.c, (cfg.device_file_request != 3).astype(int))
    assert plan.num_miss == 2


def test_capacity_extremes(cfg):
    assert np.all(place_cache(cfg.replace(cache_capacity=3)).c == 1)
    assert np.all(place_cache(cfg.replace(cache_capacity=0)).c == 0)


def test_explicit_patterns(cfg):
    assert np.all(scenario_indicators([0] * 8, 8).c == 0)
    np.testing.assert_array_equal(place_cache(cfg.replace(cache_pattern=(1, 1, 1, 1, 1, 1, 0, 0))).c,
                                  [1, 1, 1, 1, 1, 1, 0, 0])
    with pytest.raises(ValueError):
        scenario_indicators([1, 2], 2)
    with pytest.raises(ValueError):
        scenario_indicators([1, 0, 1], 2)
