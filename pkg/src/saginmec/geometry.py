"""UAV discrete-time kinematics, LEO ground track and coverage window."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass
class UAVTrajectory:
    """Horizontal UAV state. ``q`` and ``v`` have N+1 rows, ``a`` has N.

    Row ``i`` (0-based) holds the frame-``i+1`` quantity; frame n flies from
    ``q[n-1]`` to ``q[n]`` under ``v[n-1]`` and ``a[n-1]``.
    """

    q: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        N = self.a.shape[0]
        if self.q.shape != (N + 1, 2) or self.v.shape != (N + 1, 2) or self.a.shape != (N, 2):
            raise ValueError(
                f"inconsistent trajectory shapes q{self.q.shape} v{self.v.shape} a{self.a.shape}")

    @property
    def N(self) -> int:
        return self.a.shape[0]

    def copy(self) -> "UAVTrajectory":
        return UAVTrajectory(self.q.copy(), self.v.copy(), self.a.copy())

    def frame_positions(self) -> np.ndarray:
        """Position used for the link budget of each frame, shape (N, 2)."""
        return self.q[:-1]

    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "qx", "qy", "vx", "vy", "ax", "ay"])
        for i in range(self.N + 1):
            acc = [repr(float(x)) for x in self.a[i]] if i < self.N else ["", ""]
            w.writerow([i + 1, *(repr(float(x)) for x in self.q[i]),
                        *(repr(float(x)) for x in self.v[i]), *acc])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "UAVTrajectory":
        rows = list(csv.DictReader(io.StringIO(text)))
        q = np.array([[float(r["qx"]), float(r["qy"])] for r in rows])
        v = np.array([[float(r["vx"]), float(r["vy"])] for r in rows])
        a = np.array([[float(r["ax"]), float(r["ay"])] for r in rows[:-1]])
        return cls(q, v, a)


@dataclass(frozen=True)
class LEOOrbit:
    anchor: np.ndarray
    direction: np.ndarray
    v_L: float
    H_L: float
    mission_midpoint_frame: float

    @classmethod
    def from_config(cls, cfg) -> "LEOOrbit":
        return cls(np.asarray(cfg.leo_track_anchor, float),
                   np.asarray(cfg.leo_track_direction, float),
                   float(cfg.v_L), float(cfg.H_L), (cfg.N + 1) / 2.0)


def coverage_time(cfg) -> float:
    """Visibility window of the LEO over the service area, seconds."""
    return 2.0 * (cfg.R_E + cfg.H_L) * cfg.phi / cfg.v_L


def leo_position(orbit: LEOOrbit, n: int, delta: float, N: int | None = None) -> np.ndarray:
    """3-D LEO position at frame ``n`` (1-based)."""
    if n < 1 or (N is not None and n > N):
        raise IndexError(f"frame {n} out of range")
    xy = orbit.anchor + orbit.direction * orbit.v_L * (n - orbit.mission_midpoint_frame) * delta
    return np.array([xy[0], xy[1], orbit.H_L])


def leo_ground_track(cfg) -> np.ndarray:
    """Sub-satellite points for frames 1..N, shape (N, 2)."""
    orbit = LEOOrbit.from_config(cfg)
    n = np.arange(1, cfg.N + 1, dtype=float)
    offset = (n - orbit.mission_midpoint_frame) * cfg.delta * cfg.v_L
    return orbit.anchor[None, :] + offset[:, None] * orbit.direction[None, :]


def propagate(q, v, a, delta):
    """One kinematic step: returns (q', v')."""
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    a = np.asarray(a, float)
    return q + v * delta + 0.5 * a * delta * delta, v + a * delta


@dataclass
class KinematicResiduals:
    recursion_defect: float
    worst_frame: int  # 1-based frame of the largest recursion defect, 0 if none
    speed_excess: float
    accel_excess: float
    endpoint_defect: float
    feasible: bool


def kinematic_residuals(traj: UAVTrajectory, cfg, rtol: float = 1e-6) -> KinematicResiduals:
    N, d = traj.N, cfg.delta
    if N != cfg.N:
        raise ValueError(f"trajectory has {N} frames, scenario has {cfg.N}")
    q_next, v_next = propagate(traj.q[:-1], traj.v[:-1], traj.a, d)
    dq = np.linalg.norm(q_next - traj.q[1:], axis=1)
    dv = np.linalg.norm(v_next - traj.v[1:], axis=1) * d  # metres, comparable to dq
    defect = np.maximum(dq, dv)
    worst = int(np.argmax(defect)) + 1 if defect.max() > 0 else 0
    speed_excess = float(np.max(np.linalg.norm(traj.v, axis=1)) - cfg.v_max)
    accel_excess = float(np.max(np.linalg.norm(traj.a, axis=1), initial=0.0) - cfg.a_max)
    endpoint = float(max(np.linalg.norm(traj.q[0] - cfg.q_uav_start),
                         np.linalg.norm(traj.q[-1] - cfg.q_uav_end)))
    pos_scale = max(1.0, float(np.max(np.abs(traj.q))))
    ok = (defect.max() <= rtol * pos_scale and endpoint <= rtol * pos_scale
          and speed_excess <= rtol * cfg.v_max and accel_excess <= rtol * cfg.a_max)
    return KinematicResiduals(float(defect.max()), worst, speed_excess, accel_excess,
                              endpoint, bool(ok))


def straight_line_trajectory(cfg, initial_speed: float | None = None) -> UAVTrajectory:
    """Straight path between the endpoints.

    Without an initial speed the velocity is constant. With one (the figure
    scenarios start at 16 m/s) the UAV leaves q_start at that speed and keeps a
    constant acceleration along the line so that it still lands on q_end.
    """
    if initial_speed is None:
        initial_speed = cfg.uav_initial_speed
    N, d = cfg.N, cfg.delta
    start, end = np.asarray(cfg.q_uav_start, float), np.asarray(cfg.q_uav_end, float)
    disp = end - start
    dist = float(np.linalg.norm(disp))
    T = N * d
    if dist / T > cfg.v_max * (1 + 1e-12):
        raise ValueError("endpoints unreachable under v_max")
    unit = disp / dist if dist > 0 else np.array([1.0, 0.0])
    if initial_speed is None:
        s = np.full(N + 1, dist / T)
        acc = 0.0
    else:
        acc = 2.0 * (dist - N * initial_speed * d) / (N * d) ** 2
        s = initial_speed + acc * d * np.arange(N + 1)
        if s[-1] < 0 or s[-1] > cfg.v_max or abs(acc) > cfg.a_max:
            raise ValueError("initial speed incompatible with a straight-line mission")
    v = s[:, None] * unit[None, :]
    a = np.tile(acc * unit, (N, 1))
    q = np.empty((N + 1, 2))
    q[0] = start
    for i in range(N):
        q[i + 1], _ = propagate(q[i], v[i], a[i], d)
    q[-1] = end  # remove round-off drift in the fold
    return UAVTrajectory(q, v, a)
