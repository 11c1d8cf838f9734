"""Deterministic channel power gains and achievable rates.

Positions are 2-D ground projections; the altitude enters each path loss as a
separate squared term.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .geometry import leo_ground_track


def _sqdist(p, q):
    d = np.asarray(p, float) - np.asarray(q, float)
    return np.sum(d * d, axis=-1)


def g2a_gain(q_uav, q_dev, cfg):
    """Device-to-UAV channel power gain (linear)."""
    return cfg.beta0 * cfg.chi_g2a / (_sqdist(q_uav, q_dev) + cfg.H_U ** 2)


def g2s_gain(q_dev, q_leo_ground, cfg):
    """Device-to-LEO channel power gain (linear)."""
    return cfg.G * cfg.beta1 * cfg.chi_g2s / (_sqdist(q_dev, q_leo_ground) + cfg.H_L ** 2)


def shannon(bandwidth, snr):
    return bandwidth * np.log2(1.0 + snr)


def leo_gain_table(cfg, track=None) -> np.ndarray:
    """h^{D,L} for every device and frame, shape (K, N)."""
    if track is None:
        track = leo_ground_track(cfg)
    return g2s_gain(cfg.device_positions[:, None, :], track[None, :, :], cfg)


def uav_gain_table(q_frames, cfg) -> np.ndarray:
    """h^{D,U} for every device and frame, shape (K, N); ``q_frames`` is (N, 2)."""
    return g2a_gain(np.asarray(q_frames)[None, :, :], cfg.device_positions[:, None, :], cfg)


def shared_uplink_from_gain(h_leo, cfg):
    w = cfg.W_ul / cfg.K
    return shannon(w, cfg.p_D * h_leo / (cfg.N0 * w))


def shared_downlink_from_gain(h_leo, cfg):
    return shannon(cfg.W_dl, cfg.p_L * h_leo / (cfg.N0 * cfg.W_dl))


def private_uplink_from_gain(z, h_leo, h_uav, cfg):
    w = cfg.W_ul / cfg.K
    return shannon(w, cfg.p_D * (z * h_leo + (1.0 - z) * h_uav) / (cfg.N0 * w))


def private_downlink_from_gain(z, h_leo, h_uav, cfg):
    w = cfg.W_dl / cfg.K
    return shannon(w, (cfg.p_L * z * h_leo + cfg.p_U * (1.0 - z) * h_uav) / (cfg.N0 * w))


# scalar API, 1-based device and frame indices

def shared_uplink_rate(k, n, cfg, track=None):
    if track is None:
        track = leo_ground_track(cfg)
    return float(shared_uplink_from_gain(g2s_gain(cfg.device_positions[k - 1], track[n - 1], cfg), cfg))


def shared_downlink_rate(k, n, cfg, track=None):
    if track is None:
        track = leo_ground_track(cfg)
    return float(shared_downlink_from_gain(g2s_gain(cfg.device_positions[k - 1], track[n - 1], cfg), cfg))


def shared_downlink_min(n, cfg, track=None):
    if track is None:
        track = leo_ground_track(cfg)
    return float(np.min(shared_downlink_from_gain(g2s_gain(cfg.device_positions, track[n - 1], cfg), cfg)))


def private_uplink_rate(k, n, z, q_uav, cfg, track=None):
    if track is None:
        track = leo_ground_track(cfg)
    h_l = g2s_gain(cfg.device_positions[k - 1], track[n - 1], cfg)
    h_u = g2a_gain(q_uav, cfg.device_positions[k - 1], cfg)
    return float(private_uplink_from_gain(z, h_l, h_u, cfg))


def private_downlink_rate(k, n, z, q_uav, cfg, track=None):
    if track is None:
        track = leo_ground_track(cfg)
    h_l = g2s_gain(cfg.device_positions[k - 1], track[n - 1], cfg)
    h_u = g2a_gain(q_uav, cfg.device_positions[k - 1], cfg)
    return float(private_downlink_from_gain(z, h_l, h_u, cfg))


@dataclass
class LinkRates:
    """Rate tables, all (K, N) except ``shared_dl_min`` which is (N,)."""

    h_leo: np.ndarray
    shared_ul: np.ndarray
    shared_dl: np.ndarray
    shared_dl_min: np.ndarray

    @classmethod
    def build(cls, cfg) -> "LinkRates":
        h = leo_gain_table(cfg)
        dl = shared_downlink_from_gain(h, cfg)
        return cls(h, shared_uplink_from_gain(h, cfg), dl, dl.min(axis=0))

    def private(self, z, q_frames, cfg):
        """(R̄^ul, R̄^dl) tables for decisions ``z`` (K, N) and UAV positions (N, 2)."""
        h_u = uav_gain_table(q_frames, cfg)
        return (private_uplink_from_gain(z, self.h_leo, h_u, cfg),
                private_downlink_from_gain(z, self.h_leo, h_u, cfg))

    def to_csv(self, z=None, q_frames=None, cfg=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["frame", "device", "shared_ul_bps", "shared_dl_bps", "shared_dl_min_bps"]
        have_private = z is not None
        if have_private:
            pul, pdl = self.private(z, q_frames, cfg)
            cols += ["private_ul_bps", "private_dl_bps"]
        w.writerow(cols)
        K, N = self.shared_ul.shape
        for n in range(N):
            for k in range(K):
                row = [n + 1, k + 1, repr(float(self.shared_ul[k, n])),
                       repr(float(self.shared_dl[k, n])), repr(float(self.shared_dl_min[n]))]
                if have_private:
                    row += [repr(float(pul[k, n])), repr(float(pdl[k, n]))]
                w.writerow(row)
        return buf.getvalue()
