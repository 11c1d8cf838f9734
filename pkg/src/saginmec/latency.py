"""CPU-cycle accounting, per-frame latency terms, propulsion power and the
energy-efficiency objective."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import ZeroSpeedError

SPEED_FLOOR = 0.1  # m/s, fixed-wing model excludes hover


@dataclass
class FrameLoad:
    """Bits and shared-phase latencies of a plan. Bit arrays are (K, N), per-frame
    arrays (N,). ``c`` holds the cache-hit indicators the load was built for."""

    B_S_in: np.ndarray
    B_S_out: np.ndarray
    B_priv_in: np.ndarray
    B_priv_out: np.ndarray
    T_ul: np.ndarray
    T_dl: np.ndarray
    c: np.ndarray
    eps_shared: float
    eps_private: float

    @property
    def V_S(self) -> np.ndarray:
        return self.eps_shared * np.sum((1 - self.c)[:, None] * self.B_S_in, axis=0)

    @property
    def V_bar(self) -> np.ndarray:
        return self.eps_private * self.B_priv_in

    @property
    def K(self) -> int:
        return self.B_S_in.shape[0]

    @property
    def N(self) -> int:
        return self.B_S_in.shape[1]

    def frame_bits(self) -> np.ndarray:
        """Delivered output bits per frame: K shared copies plus private outputs."""
        return self.K * self.B_S_out + self.B_priv_out.sum(axis=0)

    def copy(self) -> "FrameLoad":
        return replace(self, **{f: np.array(getattr(self, f)) for f in
                                ("B_S_in", "B_S_out", "B_priv_in", "B_priv_out", "T_ul", "T_dl")})


def shared_output(B_S_in, c, cfg) -> np.ndarray:
    """Shared result size per frame from the shared inputs (mode-dependent)."""
    miss = (np.asarray(c) == 0)
    n_miss = int(miss.sum())
    if n_miss == 0:
        return np.full(B_S_in.shape[1], cfg.O_S * cfg.B_min)
    total = B_S_in[miss].sum(axis=0)
    if cfg.shared_output_mode == "sum":
        return cfg.O_S * total
    return cfg.O_S * total / n_miss  # miss_average, and equal_input (inputs coincide)


def build_load(cfg, c, B_S_in, B_priv_in, rates, T_ul=None, T_dl=None) -> FrameLoad:
    """Assemble a load; latencies default to their tight lower bounds."""
    B_S_in = np.asarray(B_S_in, float)
    B_priv_in = np.asarray(B_priv_in, float)
    c = np.asarray(c, int)
    load = FrameLoad(B_S_in, shared_output(B_S_in, c, cfg), B_priv_in,
                     cfg.O_bar * B_priv_in, np.zeros(B_S_in.shape[1]),
                     np.zeros(B_S_in.shape[1]), c, cfg.eps_shared, cfg.eps_private)
    t_ul, _, t_dl = shared_phase_times(load, rates, cfg)
    load.T_ul = t_ul if T_ul is None else np.asarray(T_ul, float)
    load.T_dl = t_dl if T_dl is None else np.asarray(T_dl, float)
    return load


def min_load(cfg, c, rates) -> FrameLoad:
    full = np.full((cfg.K, cfg.N), float(cfg.B_min))
    return build_load(cfg, c, full, full.copy(), rates)


def shared_phase_times(load: FrameLoad, rates, cfg):
    """Lower bounds (T_ul, T_exec, T_dl) per frame implied by the bits."""
    miss = (1 - load.c)[:, None]
    t_ul = np.max(miss * load.B_S_in / rates.shared_ul, axis=0)
    t_exec = load.V_S / (cfg.f_S * cfg.F_L)
    t_dl = load.B_S_out / rates.shared_dl_min
    return t_ul, t_exec, t_dl


def private_latency(z, load: FrameLoad, r_ul, r_dl, cfg) -> np.ndarray:
    """Left side of the per-device latency budget, shape (K, N).

    ``z`` may be relaxed in [0, 1]; ``r_ul``/``r_dl`` are the private rates at ``z``.
    """
    z = np.asarray(z, float)
    cpu = np.asarray(cfg.f_k)[:, None] * (z * cfg.F_L + (1 - z) * cfg.F_U)
    t_exec_s = load.V_S / (cfg.f_S * cfg.F_L)
    return (load.B_priv_in / r_ul + load.V_bar / cpu + t_exec_s[None, :]
            + load.B_priv_out / r_dl)


def residuals(z, load: FrameLoad, rates, q_frames, cfg) -> np.ndarray:
    """Slack of the per-device latency budget, (K, N); negative means violated."""
    r_ul, r_dl = rates.private(z, q_frames, cfg)
    lat = private_latency(z, load, r_ul, r_dl, cfg)
    return cfg.delta - load.T_ul[None, :] - load.T_dl[None, :] - lat


def epigraph_violation(load: FrameLoad, rates, cfg) -> np.ndarray:
    """Per-frame amount by which stored T_ul/T_dl undercut their bit-implied bounds."""
    t_ul, _, t_dl = shared_phase_times(load, rates, cfg)
    return np.maximum(np.maximum(t_ul - load.T_ul, t_dl - load.T_dl), 0.0)


def frame_feasible(n, z, load, rates, q_frames, cfg):
    """Residual per device at frame ``n`` (1-based) and the epigraph defect."""
    res = residuals(z, load, rates, q_frames, cfg)[:, n - 1]
    return res, float(epigraph_violation(load, rates, cfg)[n - 1])


def propulsion_power(v, a, cfg) -> np.ndarray:
    """Fixed-wing propulsion power, W. Accepts single vectors or (M, 2) stacks."""
    v = np.asarray(v, float)
    a = np.asarray(a, float)
    s = np.linalg.norm(v, axis=-1)
    if np.any(s < SPEED_FLOOR):
        raise ZeroSpeedError(f"speed below {SPEED_FLOOR} m/s")
    acc2 = np.sum(a * a, axis=-1)
    return cfg.lambda1 * s ** 3 + (cfg.lambda2 / s) * (1.0 + acc2 / cfg.g_const ** 2)


def frame_energy(traj, cfg) -> np.ndarray:
    return cfg.delta * propulsion_power(traj.v[:-1], traj.a, cfg)


def energy_efficiency(traj, load: FrameLoad, cfg) -> float:
    """Sum over frames of delivered bits over propulsion energy, bits/J."""
    return float(np.sum(load.frame_bits() / frame_energy(traj, cfg)))


def audit_csv(traj, load, rates, z, cfg) -> str:
    e = frame_energy(traj, cfg)
    t_ul, t_exec, t_dl = shared_phase_times(load, rates, cfg)
    res = residuals(z, load, rates, traj.frame_positions(), cfg).min(axis=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "power_W", "energy_J", "T_ul", "T_exec", "T_dl", "min_residual_s"])
    for n in range(cfg.N):
        w.writerow([n + 1, repr(float(e[n] / cfg.delta)), repr(float(e[n])),
                    repr(float(load.T_ul[n])), repr(float(t_exec[n])),
                    repr(float(load.T_dl[n])), repr(float(res[n]))])
    return buf.getvalue()
