"""Small scenario builders shared by the optimizer tests."""
import numpy as np

from saginmec.scenario import default_scenario


def tiny_scenario(seed=0, K=2, N=3, **changes):
    """K devices near a short straight path; all frames feasible at B_min."""
    rng = np.random.default_rng(seed)
    base = default_scenario()
    start = np.array([4000.0, 5000.0])
    end = start + rng.uniform(300, 450, 2)
    pos = start + rng.uniform(-800, 1400, (K, 2))
    cfg = base.replace(K=K, N=N, device_positions=pos,
                       device_file_request=np.array([1 + (k % 3) for k in range(K)]),
                       f_k=np.full(K, 0.8), q_uav_start=start, q_uav_end=end,
                       leo_track_anchor=start + [2000.0, 0.0])
    return cfg.replace(**changes) if changes else cfg
