"""Scheme runs, comparisons and figure data sets.

Every file written here is deterministic for a given scenario: wall times are
reported on the console only, and floats are written with ``repr`` so that
re-reading them reproduces the in-memory values bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .geometry import UAVTrajectory, coverage_time
from .latency import audit_csv, energy_efficiency, frame_energy
from .optimizer import SCHEMES, alternating_optimize
from .scenario import default_scenario

OUTPUT_SCHEMA_VERSION = "1"
ALL_SCHEMES = ("JO-C", "NTO-C", "NBO-C", "NOO-C", "JO-NC")
FIGURE_TAGS = ("fig5", "fig6", "fig7", "fig8", "fig9", "fig10")
FIG_INITIAL_SPEED = 16.0

# LEO ground tracks: (anchor, direction)
ORBITS = {
    1: ((5000.0, 5000.0), (-1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0))),
    2: ((5000.0, 5000.0), (1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0))),
    3: ((0.0, 5000.0), (0.0, -1.0)),
}
PATTERN_RIGHT_MISS = (1, 1, 1, 1, 1, 1, 0, 0)
PATTERN_LEFT_MISS = (0, 0, 1, 1, 1, 1, 1, 1)
PATTERN_CENTRE_MISS = (1, 1, 1, 0, 0, 1, 1, 1)
UAV_PRESETS = ((30.0, 3.0), (40.0, 4.0), (50.0, 5.0))


@dataclass
class RunResult:
    scheme: str
    config_digest: str
    energy_efficiency: float
    total_energy_J: float
    report: object
    plan: object
    config: object

    def plan_csv(self) -> str:
        return self.plan.to_csv(self.config)

    def trajectory_csv(self) -> str:
        return self.plan.traj.to_csv()


def recompute_efficiency(plan_csv: str, trajectory_csv: str, cfg) -> float:
    """Energy efficiency rebuilt from the emitted tables alone."""
    traj = UAVTrajectory.from_csv(trajectory_csv)
    rows = list(csv.DictReader(io.StringIO(plan_csv)))
    K, N = cfg.K, cfg.N
    B_S_out = np.zeros(N)
    B_P_out = np.zeros((K, N))
    for r in rows:
        k, n = int(r["device"]) - 1, int(r["frame"]) - 1
        B_S_out[n] = float(r["B_S_out"])
        B_P_out[k, n] = float(r["B_priv_out"])
    bits = K * B_S_out + B_P_out.sum(axis=0)
    return float(np.sum(bits / frame_energy(traj, cfg)))


def _verify(result: RunResult):
    ee = recompute_efficiency(result.plan_csv(), result.trajectory_csv(), result.config)
    if not math.isclose(ee, result.energy_efficiency, rel_tol=1e-9, abs_tol=0.0):
        raise AssertionError(
            f"{result.scheme}: emitted tables give {ee!r} bits/J, solver reported "
            f"{result.energy_efficiency!r}")
    return ee


def run_scheme(scheme, cfg=None, eps=1e-3, max_outer=15, fixed_z=None) -> RunResult:
    cfg = default_scenario() if cfg is None else cfg
    plan, report = alternating_optimize(cfg, scheme, eps=eps, max_outer=max_outer,
                                        fixed_z=fixed_z)
    ee = energy_efficiency(plan.traj, plan.load, cfg)
    res = RunResult(scheme, cfg.digest(), ee, float(frame_energy(plan.traj, cfg).sum()),
                    report, plan, cfg)
    _verify(res)
    return res


def compare_schemes(cfg=None, schemes=ALL_SCHEMES, eps=1e-3, max_outer=15, log=None):
    """Run ``schemes`` on one scenario; returns (rows, results by scheme).

    Infeasible schemes yield a row with ``status='infeasible'``.
    """
    cfg = default_scenario() if cfg is None else cfg
    rows, results = [], {}
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
        t0 = time.perf_counter()
        try:
            r = run_scheme(s, cfg, eps, max_outer)
        except InfeasibleError as exc:
            rows.append(dict(scheme=s, status="infeasible", ee=float("nan"),
                             energy=float("nan"), outer=0, wall=time.perf_counter() - t0,
                             note=str(exc)))
            continue
        results[s] = r
        rows.append(dict(scheme=s, status="ok", ee=r.energy_efficiency,
                         energy=r.total_energy_J, outer=r.report.outer_iterations,
                         wall=time.perf_counter() - t0, note=""))
        if log is not None:
            log(f"{s:6s} {r.energy_efficiency:.6e} bits/J  {rows[-1]['wall']:.1f} s")
    return rows, results


def comparison_csv(rows) -> str:
    """Deterministic table (wall time excluded)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "status", "energy_efficiency_bits_per_J", "total_energy_J",
                "outer_iterations"])
    for r in rows:
        w.writerow([r["scheme"], r["status"], repr(float(r["ee"])), repr(float(r["energy"])),
                    r["outer"]])
    return buf.getvalue()


# --------------------------------------------------------------------------
# figure scenarios
# --------------------------------------------------------------------------

def figure_scenario(base=None, pattern=None, orbit=1, v_max=None, a_max=None, N=None):
    cfg = default_scenario() if base is None else base
    changes = dict(uav_initial_speed=FIG_INITIAL_SPEED)
    if pattern is not None:
        changes["cache_pattern"] = tuple(pattern)
    anchor, direction = ORBITS[orbit]
    changes["leo_track_anchor"] = np.array(anchor)
    changes["leo_track_direction"] = np.array(direction)
    if v_max is not None:
        changes["v_max"] = v_max
    if a_max is not None:
        changes["a_max"] = a_max
    if N is not None:
        changes["N"] = N
    return cfg.replace(**changes)


def _write(out_dir, name, text, files):
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    files.append(name)


def _trajectories_csv(labelled):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "frame", "qx", "qy", "vx", "vy"])
    for label, traj in labelled:
        for i in range(traj.N + 1):
            w.writerow([label, i + 1, repr(float(traj.q[i, 0])), repr(float(traj.q[i, 1])),
                        repr(float(traj.v[i, 0])), repr(float(traj.v[i, 1]))])
    return buf.getvalue()


def _summary_csv(rows, cols):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


def _fig5(out, base, eps, max_outer, files, log):
    cfg = figure_scenario(base)
    rows, results = compare_schemes(cfg, ALL_SCHEMES, eps, max_outer, log)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "outer_iter", "objective_bits_per_J"])
    for s, r in results.items():
        for i, v in enumerate(r.report.objective_trace):
            w.writerow([s, i, repr(float(v))])
    _write(out, "fig5_convergence.csv", buf.getvalue(), files)
    _write(out, "fig5_schemes.csv", comparison_csv(rows), files)
    return {"scenario_digest": cfg.digest()}


def _fig6(out, base, eps, max_outer, files, log, Ns=(40, 50, 60, 70, 80)):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["num_frames", "mission_time_s", "scheme", "status",
                "energy_efficiency_bits_per_J"])
    for N in Ns:
        cfg = figure_scenario(base, pattern=PATTERN_RIGHT_MISS, N=N)
        rows, _ = compare_schemes(cfg, ALL_SCHEMES, eps, max_outer, log)
        for r in rows:
            w.writerow([N, repr(N * cfg.delta), r["scheme"], r["status"], repr(float(r["ee"]))])
    _write(out, "fig6_mission_time.csv", buf.getvalue(), files)
    return {"coverage_time_s": coverage_time(figure_scenario(base))}


def _fig7(out, base, eps, max_outer, files, log):
    cases = [("JO-NC", "JO-NC", (0,) * 8), ("JO-C right-miss", "JO-C", PATTERN_RIGHT_MISS),
             ("JO-C left-miss", "JO-C", PATTERN_LEFT_MISS)]
    trajs, rows = [], []
    for label, scheme, pattern in cases:
        cfg = figure_scenario(base, pattern=pattern)
        r = run_scheme(scheme, cfg, eps, max_outer)
        trajs.append((label, r.plan.traj))
        rows.append(dict(case=label, scheme=scheme, pattern="".join(map(str, pattern)),
                         energy_efficiency_bits_per_J=r.energy_efficiency,
                         total_energy_J=r.total_energy_J))
        if log:
            log(f"fig7 {label}: {r.energy_efficiency:.4e} bits/J, {r.total_energy_J:.2f} J")
    _write(out, "fig7_trajectories.csv", _trajectories_csv(trajs), files)
    _write(out, "fig7_summary.csv", _summary_csv(rows, ["case", "scheme", "pattern",
                                                        "energy_efficiency_bits_per_J",
                                                        "total_energy_J"]), files)
    return {"energy_gap_J": rows[1]["total_energy_J"] - rows[0]["total_energy_J"]}


def _fig8(out, base, eps, max_outer, files, log):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "device", "frame", "z", "B_S_out", "B_priv_out"])
    for label, scheme, pattern in (("JO-C", "JO-C", PATTERN_RIGHT_MISS),
                                   ("JO-NC", "JO-NC", (0,) * 8)):
        cfg = figure_scenario(base, pattern=pattern)
        r = run_scheme(scheme, cfg, eps, max_outer)
        L = r.plan.load
        for k in (0, 6):
            for n in range(cfg.N):
                w.writerow([label, k + 1, n + 1, int(r.plan.z[k, n]), repr(float(L.B_S_out[n])),
                            repr(float(L.B_priv_out[k, n]))])
        if log:
            log(f"fig8 {label}: z=1 in {int(r.plan.z.sum())} of {r.plan.z.size} entries")
    _write(out, "fig8_decisions_bits.csv", buf.getvalue(), files)
    return {}


def _fig9(out, base, eps, max_outer, files, log):
    trajs, rows = [], []
    for vm, am in UAV_PRESETS:
        cfg = figure_scenario(base, pattern=PATTERN_CENTRE_MISS, v_max=vm, a_max=am)
        r = run_scheme("JO-C", cfg, eps, max_outer)
        label = f"vmax={vm:g},amax={am:g}"
        trajs.append((label, r.plan.traj))
        rows.append(dict(case=label, v_max=vm, a_max=am,
                         energy_efficiency_bits_per_J=r.energy_efficiency,
                         total_energy_J=r.total_energy_J))
        if log:
            log(f"fig9 {label}: {r.energy_efficiency:.4e} bits/J")
    _write(out, "fig9_trajectories.csv", _trajectories_csv(trajs), files)
    _write(out, "fig9_summary.csv", _summary_csv(rows, ["case", "v_max", "a_max",
                                                        "energy_efficiency_bits_per_J",
                                                        "total_energy_J"]), files)
    return {}


def _fig10(out, base, eps, max_outer, files, log):
    trajs, rows = [], []
    for orbit in (1, 2, 3):
        cfg = figure_scenario(base, pattern=PATTERN_CENTRE_MISS, orbit=orbit)
        r = run_scheme("JO-C", cfg, eps, max_outer)
        trajs.append((f"orbit{orbit}", r.plan.traj))
        rows.append(dict(case=f"orbit{orbit}", mean_qx_m=float(r.plan.traj.q[:, 0].mean()),
                         mean_qy_m=float(r.plan.traj.q[:, 1].mean()),
                         leo_offloads=int(r.plan.z.sum()),
                         energy_efficiency_bits_per_J=r.energy_efficiency))
        if log:
            log(f"fig10 orbit {orbit}: {r.energy_efficiency:.4e} bits/J")
    _write(out, "fig10_trajectories.csv", _trajectories_csv(trajs), files)
    _write(out, "fig10_summary.csv", _summary_csv(rows, ["case", "mean_qx_m", "mean_qy_m",
                                                         "leo_offloads",
                                                         "energy_efficiency_bits_per_J"]), files)
    return {}


_FIGURES = {"fig5": _fig5, "fig6": _fig6, "fig7": _fig7, "fig8": _fig8, "fig9": _fig9,
            "fig10": _fig10}


def reproduce_figure(tag, out_dir, base=None, eps=1e-3, max_outer=15, log=None):
    """Write the CSV series of figure ``tag`` plus a manifest; returns file names."""
    if tag not in _FIGURES:
        raise ValueError(f"unknown figure tag {tag!r}; expected one of {FIGURE_TAGS}")
    os.makedirs(out_dir, exist_ok=True)
    files = []
    extra = _FIGURES[tag](out_dir, base, eps, max_outer, files, log)
    manifest = {"schema_version": OUTPUT_SCHEMA_VERSION, "figure": tag, "eps": eps,
                "max_outer": max_outer, "files": sorted(files), "summary": extra}
    _write(out_dir, f"{tag}_manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n",
           files)
    return files


def write_run(result: RunResult, out_dir):
    """Plan, trajectory, trace, audit and manifest of a single run."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    cfg = result.config
    _write(out_dir, "plan.csv", result.plan_csv(), files)
    _write(out_dir, "trajectory.csv", result.trajectory_csv(), files)
    _write(out_dir, "trace.csv", result.report.trace_csv(), files)
    _write(out_dir, "audit.csv", audit_csv(result.plan.traj, result.plan.load, result.plan.rates,
                                           result.plan.z, cfg), files)
    manifest = {
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "scheme": result.scheme,
        "scenario_digest": result.config_digest,
        "energy_efficiency_bits_per_J": result.energy_efficiency,
        "total_energy_J": result.total_energy_J,
        "outer_iterations": result.report.outer_iterations,
        "converged": result.report.converged,
        "final_residuals": result.report.final_residuals,
        "files": sorted(files),
    }
    _write(out_dir, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n", files)
    return files


__all__ = ["RunResult", "run_scheme", "compare_schemes", "reproduce_figure", "write_run",
           "figure_scenario", "recompute_efficiency", "ALL_SCHEMES", "FIGURE_TAGS"]
