"""Scenario parameters: defaults, TOML ingestion/serialisation, validation.

All stored quantities are SI and linear. dB-valued inputs are converted when a
document is loaded.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import tomli
import tomli_w

from .errors import ScenarioError

# Frozen 8-device preset inside the 10 km x 10 km service area, sorted by x so
# that devices 1-2 are the leftmost and 7-8 the rightmost.
PRESET_DEVICE_POSITIONS_M = np.array(
    [
        [1200.0, 2600.0],
        [1900.0, 7400.0],
        [3300.0, 4700.0],
        [4200.0, 8900.0],
        [5100.0, 3100.0],
        [5900.0, 6300.0],
        [7400.0, 8300.0],
        [8100.0, 5200.0],
    ]
)
PRESET_FILE_REQUESTS = np.array([1, 2, 1, 2, 1, 2, 3, 3])

PRIVATE_BITS_MODES = ("optimized", "fixed_min")
SHARED_OUTPUT_MODES = ("miss_average", "sum", "equal_input")


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    K: int = 8
    N: int = 60
    delta: float = 7.0
    F: int = 3
    cache_capacity: int = 2
    zipf_rho: float = 0.6

    W_ul: float = 40e6
    W_dl: float = 40e6
    N0: float = 10 ** (-174 / 10) * 1e-3
    p_D: float = 0.2
    p_U: float = 0.2
    p_L: float = 0.2

    beta0: float = 1e-5
    beta1: float = 1e-5
    G: float = 7000.0
    chi_g2a: float = 1.0
    chi_g2s: float = 1.0
    chi_a2a: float = 1.0  # inert: no link in the model uses it
    rician_k_g2a_db: float = 12.0  # inert, recorded only
    rician_k_a2a_db: float = 30.0  # inert, recorded only

    eps_shared: float = 2640.0
    eps_private: float = 2640.0 * 0.3
    f_S: float = 1.0
    f_k: np.ndarray = field(default_factory=lambda: _frozen(np.full(8, 0.8)))
    F_L: float = 1e11
    F_U: float = 5e10
    O_S: float = 0.5
    O_bar: float = 0.5
    B_min: float = 5e6

    lambda1: float = 9.26e-4
    lambda2: float = 2250.0
    g_const: float = 9.8
    v_max: float = 50.0
    a_max: float = 5.0
    H_U: float = 1000.0
    q_uav_start: np.ndarray = field(default_factory=lambda: _frozen([0.0, 5000.0]))
    q_uav_end: np.ndarray = field(default_factory=lambda: _frozen([5000.0, 10000.0]))
    uav_initial_speed: float | None = None

    H_L: float = 600e3
    v_L: float = 7500.0
    R_E: float = 6371e3
    phi: float = math.radians(15.8)
    leo_track_anchor: np.ndarray = field(default_factory=lambda: _frozen([5000.0, 5000.0]))
    leo_track_direction: np.ndarray = field(
        default_factory=lambda: _frozen(np.array([-1.0, -1.0]) / math.sqrt(2.0))
    )

    device_positions: np.ndarray = field(
        default_factory=lambda: _frozen(PRESET_DEVICE_POSITIONS_M)
    )
    device_file_request: np.ndarray = field(
        default_factory=lambda: _frozen(PRESET_FILE_REQUESTS, dtype=int)
    )
    private_bits_mode: str = "optimized"
    shared_output_mode: str = "miss_average"
    cache_pattern: tuple | None = None
    layout_seed: int = 0

    def __post_init__(self):
        # normalise array-valued fields to read-only float/int arrays
        for name in ("f_k", "q_uav_start", "q_uav_end", "leo_track_anchor",
                     "leo_track_direction", "device_positions"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "device_file_request",
                           _frozen(self.device_file_request, dtype=int))
        if self.cache_pattern is not None:
            object.__setattr__(self, "cache_pattern",
                               tuple(int(c) for c in self.cache_pattern))

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if np.shape(a) != np.shape(b) or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def mission_time(self) -> float:
        return self.N * self.delta

    def digest(self) -> str:
        """SHA-256 of the canonical serialisation."""
        return hashlib.sha256(dumps_scenario(self).encode("utf-8")).hexdigest()


def default_scenario() -> ScenarioConfig:
    return ScenarioConfig()


def device_layout(K, F=3, zipf_rho=0.6, seed=0):
    """Positions and file requests for ``K`` devices.

    The first eight come from the frozen preset; any extra devices are placed
    uniformly in the 10 km square and draw their request from the Zipf law,
    both with a seeded generator.
    """
    from .caching import zipf_popularity_vector

    pos = PRESET_DEVICE_POSITIONS_M[: min(K, 8)]
    files = np.clip(PRESET_FILE_REQUESTS[: min(K, 8)], 1, F)
    if K > 8:
        rng = np.random.default_rng(seed)
        extra = rng.uniform(0.0, 10000.0, size=(K - 8, 2))
        pmf = zipf_popularity_vector(F, zipf_rho)
        extra_files = rng.choice(np.arange(1, F + 1), size=K - 8, p=pmf)
        pos = np.vstack([pos, extra])
        files = np.concatenate([files, extra_files])
    return pos, files


# --------------------------------------------------------------------------
# document schema
# --------------------------------------------------------------------------

def _db_to_lin(x):
    return 10.0 ** (x / 10.0)


def _dbm_to_w(x):
    return 10.0 ** (x / 10.0) * 1e-3


# key -> (field, kind, converter). kind is one of: int, float, pair, str, opt_float
_SCHEMA = {
    "num_devices": ("K", "int", None),
    "num_frames": ("N", "int", None),
    "frame_length_s": ("delta", "float", None),
    "num_files": ("F", "int", None),
    "cache_capacity_files": ("cache_capacity", "int", None),
    "zipf_skewness": ("zipf_rho", "float", None),
    "bandwidth_ul_hz": ("W_ul", "float", None),
    "bandwidth_dl_hz": ("W_dl", "float", None),
    "noise_psd_w_per_hz": ("N0", "float", None),
    "noise_psd_dbm_per_hz": ("N0", "float", _dbm_to_w),
    "power_device_w": ("p_D", "float", None),
    "power_uav_w": ("p_U", "float", None),
    "power_leo_w": ("p_L", "float", None),
    "ref_gain_g2a_linear": ("beta0", "float", None),
    "ref_gain_g2s_linear": ("beta1", "float", None),
    "antenna_gain_linear": ("G", "float", None),
    "antenna_gain_db": ("G", "float", _db_to_lin),
    "fading_g2a_linear": ("chi_g2a", "float", None),
    "fading_g2a_db": ("chi_g2a", "float", _db_to_lin),
    "fading_g2s_linear": ("chi_g2s", "float", None),
    "fading_g2s_db": ("chi_g2s", "float", _db_to_lin),
    "fading_a2a_linear": ("chi_a2a", "float", None),
    "fading_a2a_db": ("chi_a2a", "float", _db_to_lin),
    "rician_k_g2a_db": ("rician_k_g2a_db", "float", None),
    "rician_k_a2a_db": ("rician_k_a2a_db", "float", None),
    "cycles_per_bit_shared": ("eps_shared", "float", None),
    "cycles_per_bit_private": ("eps_private", "float", None),
    "cpu_fraction_shared": ("f_S", "float", None),
    "cpu_rate_leo_hz": ("F_L", "float", None),
    "cpu_rate_uav_hz": ("F_U", "float", None),
    "output_ratio_shared": ("O_S", "float", None),
    "output_ratio_private": ("O_bar", "float", None),
    "min_input_bits": ("B_min", "float", None),
    "propulsion_lambda1_w_s3_per_m3": ("lambda1", "float", None),
    "propulsion_lambda2_w_m_per_s": ("lambda2", "float", None),
    "gravity_mps2": ("g_const", "float", None),
    "v_max_mps": ("v_max", "float", None),
    "a_max_mps2": ("a_max", "float", None),
    "uav_altitude_m": ("H_U", "float", None),
    "uav_start_m": ("q_uav_start", "pair", None),
    "uav_end_m": ("q_uav_end", "pair", None),
    "uav_initial_speed_mps": ("uav_initial_speed", "float", None),
    "leo_altitude_m": ("H_L", "float", None),
    "leo_speed_mps": ("v_L", "float", None),
    "earth_radius_m": ("R_E", "float", None),
    "coverage_angle_rad": ("phi", "float", None),
    "coverage_angle_deg": ("phi", "float", math.radians),
    "leo_anchor_m": ("leo_track_anchor", "pair", None),
    "leo_direction": ("leo_track_direction", "pair", None),
    "private_bits_mode": ("private_bits_mode", "str", None),
    "shared_output_mode": ("shared_output_mode", "str", None),
    "cache_pattern": ("cache_pattern", "intlist", None),
    "layout_seed": ("layout_seed", "int", None),
}
_DEVICE_KEYS = {"x_m", "y_m", "file", "cpu_fraction"}
_UNIT_TAGS = ("_dbm_per_hz", "_w_per_hz", "_mps2", "_mps", "_hz", "_w", "_m", "_s",
              "_db", "_linear", "_rad", "_deg", "_bits", "_files",
              "_w_s3_per_m3", "_w_m_per_s")


def _stem(key):
    for tag in sorted(_UNIT_TAGS, key=len, reverse=True):
        if key.endswith(tag):
            return key[: -len(tag)]
    return key


_STEMS = {_stem(k) for k in _SCHEMA}


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _coerce(key, kind, value):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        if not _is_number(value):
            raise ScenarioError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if kind == "pair":
        if (not isinstance(value, list) or len(value) != 2
                or not all(_is_number(v) for v in value)):
            raise ScenarioError(f"{key}: expected [x, y], got {value!r}")
        return np.array(value, dtype=float)
    if kind == "str":
        if not isinstance(value, str):
            raise ScenarioError(f"{key}: expected a string, got {value!r}")
        return value
    if kind == "intlist":
        if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ScenarioError(f"{key}: expected a list of integers, got {value!r}")
        return tuple(value)
    raise AssertionError(kind)


def load_scenario(source) -> ScenarioConfig:
    """Parse a TOML scenario document (bytes, str or binary file object).

    Omitted keys keep their default value. Device arrays follow ``num_devices``
    unless a ``[[devices]]`` table list is given.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = tomli.loads(source)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}") from exc

    base = default_scenario()
    values = {}
    seen_fields = {}
    devices = doc.pop("devices", None)
    for key, raw in doc.items():
        if key not in _SCHEMA:
            stem = _stem(key)
            if stem in _STEMS or any(key.startswith(s + "_") for s in _STEMS):
                raise ScenarioError(f"{key}: unknown unit tag")
            raise ScenarioError(f"{key}: unknown field")
        fname, kind, conv = _SCHEMA[key]
        if fname in seen_fields:
            raise ScenarioError(f"{key}: duplicates {seen_fields[fname]}")
        seen_fields[fname] = key
        val = _coerce(key, kind, raw)
        values[fname] = conv(val) if conv is not None else val

    K = values.get("K", base.K)
    F = values.get("F", base.F)
    rho = values.get("zipf_rho", base.zipf_rho)
    if devices is not None:
        if not isinstance(devices, list) or not all(isinstance(d, dict) for d in devices):
            raise ScenarioError("devices: expected an array of tables")
        if "K" in values and values["K"] != len(devices):
            raise ScenarioError(
                f"num_devices={values['K']} but {len(devices)} [[devices]] entries")
        K = len(devices)
        pos, files, fk = [], [], []
        for i, dev in enumerate(devices):
            extra = set(dev) - _DEVICE_KEYS
            if extra:
                raise ScenarioError(f"devices[{i}]: unknown field(s) {sorted(extra)}")
            for req in ("x_m", "y_m"):
                if req not in dev:
                    raise ScenarioError(f"devices[{i}]: missing {req}")
            pos.append([_coerce(f"devices[{i}].x_m", "float", dev["x_m"]),
                        _coerce(f"devices[{i}].y_m", "float", dev["y_m"])])
            files.append(_coerce(f"devices[{i}].file", "int", dev.get("file", 1)))
            fk.append(_coerce(f"devices[{i}].cpu_fraction", "float",
                              dev.get("cpu_fraction", 0.8)))
        values["device_positions"] = np.array(pos, dtype=float).reshape(K, 2)
        values["device_file_request"] = np.array(files, dtype=int)
        values["f_k"] = np.array(fk, dtype=float)
    elif K != base.K:
        pos, files = device_layout(K, F, rho, values.get("layout_seed", base.layout_seed))
        values["device_positions"] = pos
        values["device_file_request"] = files
        values["f_k"] = np.full(K, 0.8)
    values["K"] = K
    return base.replace(**values)


def dumps_scenario(cfg: ScenarioConfig) -> str:
    """Canonical TOML text; ``load_scenario(dumps_scenario(c)) == c``."""
    doc = {}
    for key, (fname, kind, conv) in _SCHEMA.items():
        if conv is not None:
            continue  # only canonical (SI, linear) keys are emitted
        val = getattr(cfg, fname)
        if val is None:
            continue
        if kind == "pair":
            val = [float(v) for v in val]
        elif kind == "intlist":
            val = [int(v) for v in val]
        elif kind == "float":
            val = float(val)
        elif kind == "int":
            val = int(val)
        doc[key] = val
    doc["devices"] = [
        {"x_m": float(p[0]), "y_m": float(p[1]), "file": int(f), "cpu_fraction": float(fk)}
        for p, f, fk in zip(cfg.device_positions, cfg.device_file_request, cfg.f_k)
    ]
    return tomli_w.dumps(doc)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self):
        lines = [f"error   {p}: {m}" for p, m in self.errors]
        lines += [f"warning {p}: {m}" for p, m in self.warnings]
        return "\n".join(lines) if lines else "ok"


def _check_invariants(cfg, rep):
    err = rep.errors.append
    for name in ("K", "N", "F"):
        if getattr(cfg, name) < 1:
            err((name, "must be >= 1"))
    if not 0 <= cfg.cache_capacity <= cfg.F:
        err(("cache_capacity", "must lie in [0, F]"))
    if cfg.zipf_rho < 0:
        err(("zipf_rho", "must be >= 0"))
    for name in ("delta", "W_ul", "W_dl", "N0", "p_D", "p_U", "p_L", "beta0", "beta1",
                 "G", "chi_g2a", "chi_g2s", "eps_shared", "eps_private", "F_L", "F_U",
                 "lambda1", "lambda2", "g_const", "v_max", "a_max", "H_U", "H_L",
                 "v_L", "R_E"):
        v = getattr(cfg, name)
        if not (np.isfinite(v) and v > 0):
            err((name, "must be finite and > 0"))
    if cfg.B_min < 0:
        err(("B_min", "must be >= 0"))
    if cfg.O_S < 0 or cfg.O_bar < 0:
        err(("O_S/O_bar", "output ratios must be >= 0"))
    if cfg.phi < 0:
        err(("phi", "must be >= 0"))
    if not 0 < cfg.f_S <= 1:
        err(("f_S", "must lie in (0, 1]"))
    if cfg.f_k.shape != (cfg.K,):
        err(("f_k", f"expected {cfg.K} entries"))
    elif np.any((cfg.f_k <= 0) | (cfg.f_k > 1)):
        err(("f_k", "each entry must lie in (0, 1]"))
    if cfg.F_L < cfg.F_U:
        err(("F_L", "LEO processor must be at least as fast as the UAV's"))
    if abs(np.linalg.norm(cfg.leo_track_direction) - 1.0) > 1e-9:
        err(("leo_track_direction", "must have unit norm"))
    if cfg.device_positions.shape != (cfg.K, 2):
        err(("device_positions", f"expected shape ({cfg.K}, 2)"))
    if cfg.device_file_request.shape != (cfg.K,):
        err(("device_file_request", f"expected {cfg.K} entries"))
    elif np.any((cfg.device_file_request < 1) | (cfg.device_file_request > cfg.F)):
        err(("device_file_request", "entries must lie in [1, F]"))
    if cfg.private_bits_mode not in PRIVATE_BITS_MODES:
        err(("private_bits_mode", f"must be one of {PRIVATE_BITS_MODES}"))
    if cfg.shared_output_mode not in SHARED_OUTPUT_MODES:
        err(("shared_output_mode", f"must be one of {SHARED_OUTPUT_MODES}"))
    if cfg.cache_pattern is not None:
        if len(cfg.cache_pattern) != cfg.K or any(c not in (0, 1) for c in cfg.cache_pattern):
            err(("cache_pattern", f"expected {cfg.K} entries in {{0, 1}}"))
    if cfg.uav_initial_speed is not None and not 0 < cfg.uav_initial_speed <= cfg.v_max:
        err(("uav_initial_speed", "must lie in (0, v_max]"))


def validate(cfg: ScenarioConfig) -> ValidationReport:
    """Check invariants, reachability and the coverage window.

    When the invariants hold, the straight-line / minimum-bit starting plan is
    built and its per-frame latency budget audited, so an empty error list
    means the optimiser has a feasible starting point.
    """
    from .geometry import coverage_time

    rep = ValidationReport()
    _check_invariants(cfg, rep)
    if rep.errors:
        return rep

    dist = float(np.linalg.norm(cfg.q_uav_end - cfg.q_uav_start))
    if dist / cfg.mission_time > cfg.v_max:
        rep.errors.append(("q_uav_end", "endpoints unreachable under v_max"))
        return rep
    if dist / cfg.mission_time < 0.1 and cfg.uav_initial_speed is None:
        rep.errors.append(("q_uav_end", "straight-line start hovers below the 0.1 m/s "
                                        "fixed-wing speed floor"))
        return rep

    t_v = coverage_time(cfg)
    if cfg.mission_time > t_v:
        rep.warnings.append(
            ("N", f"mission exceeds coverage window ({cfg.mission_time:.1f} s > {t_v:.1f} s)"))

    from .optimizer.ao import initial_plan
    from .errors import InfeasibleError

    try:
        initial_plan(cfg)
    except InfeasibleError as exc:
        rep.errors.append(("plan", f"no feasible minimum-bit starting plan: {exc}"))
    except ValueError as exc:
        rep.errors.append(("plan", str(exc)))
    return rep
