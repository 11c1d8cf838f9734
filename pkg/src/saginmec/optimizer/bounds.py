"""Tangent rate bounds, the velocity-slack bound and the Dinkelbach helpers."""
from __future__ import annotations

import math

import numpy as np

from ..channel import g2s_gain
from ..geometry import leo_ground_track
from ..latency import SPEED_FLOOR

LN2 = math.log(2.0)


def link_constants(z, h_leo, cfg, link: str):
    """(A, gamma, per-device bandwidth) of the private ``link`` ('ul' or 'dl').

    The private rate is ``w * log2(1 + gamma + A / (|q - p|^2 + H_U^2))``.
    """
    z = np.asarray(z, float)
    if link == "ul":
        W, p_uav, p_leo = cfg.W_ul, cfg.p_D, cfg.p_D
    elif link == "dl":
        W, p_uav, p_leo = cfg.W_dl, cfg.p_U, cfg.p_L
    else:
        raise ValueError(link)
    scale = cfg.K / (cfg.N0 * W)
    A = p_uav * (1.0 - z) * cfg.beta0 * cfg.chi_g2a * scale
    gamma = p_leo * z * h_leo * scale
    return A, gamma, W / cfg.K


def rate_of_sqdist(s, A, gamma, w, H):
    return w * np.log2(1.0 + gamma + A / (s + H * H))


def tangent_coefficients(s0, A, gamma, w, H):
    """Rate and negative slope at ``s0`` of the rate as a function of squared
    horizontal distance. The rate is convex in that variable, so the tangent
    ``r0 - c1 (s - s0)`` is a global lower bound."""
    x0 = s0 + H * H
    r0 = rate_of_sqdist(s0, A, gamma, w, H)
    c1 = (w / LN2) * A / (x0 * ((1.0 + gamma) * x0 + A))
    return r0, c1


def tangent_rate(q, q_exp, p, A, gamma, w, H):
    """Lower bound on the private rate at UAV position ``q`` expanded at ``q_exp``."""
    s0 = np.sum((np.asarray(q_exp, float) - p) ** 2, axis=-1)
    s = np.sum((np.asarray(q, float) - p) ** 2, axis=-1)
    r0, c1 = tangent_coefficients(s0, A, gamma, w, H)
    return r0 - c1 * (s - s0)


def _bound(link, k, n, q, q_exp, z, cfg, track):
    if track is None:
        track = leo_ground_track(cfg)
    p = cfg.device_positions[k - 1]
    h = g2s_gain(p, track[n - 1], cfg)
    A, gamma, w = link_constants(z, h, cfg, link)
    return float(tangent_rate(q, q_exp, p, A, gamma, w, cfg.H_U))


def taylor_ul_bound(k, n, q, q_exp, z, cfg, track=None) -> float:
    return _bound("ul", k, n, q, q_exp, z, cfg, track)


def taylor_dl_bound(k, n, q, q_exp, z, cfg, track=None) -> float:
    return _bound("dl", k, n, q, q_exp, z, cfg, track)


def velocity_lower_bound(v, v_exp):
    """Tangent under-estimator of |v|^2 at ``v_exp``."""
    v = np.asarray(v, float)
    v_exp = np.asarray(v_exp, float)
    return np.sum(v_exp * v_exp, axis=-1) + 2.0 * np.sum(v_exp * (v - v_exp), axis=-1)


def surrogate_energy(v, a, om, cfg):
    """Propulsion expression with the speed in the induced term replaced by ``om``."""
    v = np.asarray(v, float)
    a = np.asarray(a, float)
    om = np.asarray(om, float)
    s = np.linalg.norm(v, axis=-1)
    return (cfg.lambda1 * s ** 3 + cfg.lambda2 / om
            + cfg.lambda2 * np.sum(a * a, axis=-1) / (cfg.g_const ** 2 * om))


def dinkelbach_alpha(bits, v, a, om, cfg):
    """Closed-form per-frame parameter sqrt(bits) / energy expression."""
    om = np.asarray(om, float)
    if np.any(om < SPEED_FLOOR * (1 - 1e-12)):
        raise ValueError(f"slack below the {SPEED_FLOOR} m/s floor")
    return np.sqrt(np.asarray(bits, float)) / surrogate_energy(v, a, om, cfg)


def dinkelbach_value(alpha, bits, v, a, om, cfg) -> float:
    alpha = np.asarray(alpha, float)
    E = surrogate_energy(v, a, om, cfg)
    return float(np.sum(2.0 * alpha * np.sqrt(np.asarray(bits, float)) - alpha ** 2 * E))


def dinkelbach_gap(alpha, bits, E) -> float:
    """sum_n alpha_n (sqrt(B_n) - alpha_n E_n): non-negative after an inner solve
    started from the point that defined ``alpha``, zero at a fixed point."""
    alpha = np.asarray(alpha, float)
    return float(np.sum(alpha * (np.sqrt(np.asarray(bits, float)) - alpha * np.asarray(E))))


def lemma2_psi(x, gamma, B, C1, C2):
    """gamma / log2(1 + B (C1 - C2) x + B C2): reciprocal-rate shape in the decision."""
    return gamma / np.log2(1.0 + B * (C1 - C2) * np.asarray(x, float) + B * C2)
