"""Zipf popularity, LEO cache placement and per-device hit indicators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def zipf_popularity_vector(F: int, rho: float) -> np.ndarray:
    w = np.arange(1, F + 1, dtype=float) ** (-float(rho))
    return w / w.sum()


def zipf_popularity(f: int, F: int, rho: float) -> float:
    if not 1 <= f <= F:
        raise ValueError(f"file index {f} outside 1..{F}")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    return float(zipf_popularity_vector(F, rho)[f - 1])


@dataclass(frozen=True)
class CachePlan:
    cached_files: frozenset
    c: np.ndarray  # (K,) int, 1 = hit
    popularity: np.ndarray | None

    @property
    def num_miss(self) -> int:
        return int(np.sum(self.c == 0))


def place_cache(cfg) -> CachePlan:
    """Cache the most popular files up to capacity (stable order breaks ties).

    A ``cache_pattern`` set on the scenario overrides the popularity rule.
    """
    if cfg.cache_pattern is not None:
        return scenario_indicators(cfg.cache_pattern, K=cfg.K)
    pop = zipf_popularity_vector(cfg.F, cfg.zipf_rho)
    order = np.argsort(-pop, kind="stable")
    cached = frozenset(int(i) + 1 for i in order[: cfg.cache_capacity])
    c = np.array([1 if int(f) in cached else 0 for f in cfg.device_file_request], dtype=int)
    c.setflags(write=False)
    return CachePlan(cached, c, pop)


def scenario_indicators(pattern, K: int | None = None) -> CachePlan:
    """Install explicit hit indicators, bypassing the popularity rule."""
    c = np.array([int(x) for x in pattern], dtype=int)
    if K is not None and c.shape != (K,):
        raise ValueError(f"cache pattern has {c.size} entries, expected {K}")
    if np.any((c != 0) & (c != 1)):
        raise ValueError("cache pattern entries must be 0 or 1")
    c.setflags(write=False)
    return CachePlan(frozenset(), c, None)
