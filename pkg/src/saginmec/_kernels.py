"""Hot per-row kernels with a numba implementation and a numpy twin.

Set ``SAGINMEC_NUMBA=0`` to force the numpy versions (numba is also skipped when
it cannot be imported). Both variants return identical arrays up to round-off;
``IMPLEMENTATIONS`` exposes them side by side for tests and benchmarks.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - depends on the environment
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _use_numba() -> bool:
    return _HAVE_NUMBA and os.environ.get("SAGINMEC_NUMBA", "1") != "0"


# --------------------------------------------------------------------------
# weighted propulsion energy  w * (l1 |v|^3 + l2/om + kap |a|^2/om), support
# ordered (vx, vy, ax, ay, om)
# --------------------------------------------------------------------------

def energy_rows_np(v, a, om, w, l1, l2, kap):
    m = v.shape[0]
    s = np.sqrt(np.sum(v * v, axis=1))
    a2 = np.sum(a * a, axis=1)
    val = w * (l1 * s ** 3 + l2 / om + kap * a2 / om)
    grad = np.empty((m, 5))
    grad[:, 0:2] = (w * 3.0 * l1 * s)[:, None] * v
    grad[:, 2:4] = (w * 2.0 * kap / om)[:, None] * a
    grad[:, 4] = -w * (l2 + kap * a2) / om ** 2
    hess = np.zeros((m, 5, 5))
    safe = np.where(s > 0, s, 1.0)
    outer = v[:, :, None] * v[:, None, :] / safe[:, None, None]
    eye = np.eye(2)[None]
    hess[:, 0:2, 0:2] = (w * 3.0 * l1)[:, None, None] * (s[:, None, None] * eye + outer)
    hess[:, 2:4, 2:4] = (w * 2.0 * kap / om)[:, None, None] * eye
    cross = (-w * 2.0 * kap / om ** 2)[:, None] * a
    hess[:, 2:4, 4] = cross
    hess[:, 4, 2:4] = cross
    hess[:, 4, 4] = w * 2.0 * (l2 + kap * a2) / om ** 3
    return val, grad, hess


def _energy_rows_loop(v, a, om, w, l1, l2, kap):
    m = v.shape[0]
    val = np.empty(m)
    grad = np.zeros((m, 5))
    hess = np.zeros((m, 5, 5))
    for i in range(m):
        vx, vy, ax, ay, o, wi = v[i, 0], v[i, 1], a[i, 0], a[i, 1], om[i], w[i]
        s = np.sqrt(vx * vx + vy * vy)
        a2 = ax * ax + ay * ay
        val[i] = wi * (l1 * s * s * s + l2 / o + kap * a2 / o)
        grad[i, 0] = wi * 3.0 * l1 * s * vx
        grad[i, 1] = wi * 3.0 * l1 * s * vy
        grad[i, 2] = wi * 2.0 * kap * ax / o
        grad[i, 3] = wi * 2.0 * kap * ay / o
        grad[i, 4] = -wi * (l2 + kap * a2) / (o * o)
        c = wi * 3.0 * l1
        if s > 0:
            hess[i, 0, 0] = c * (s + vx * vx / s)
            hess[i, 1, 1] = c * (s + vy * vy / s)
            hess[i, 0, 1] = c * vx * vy / s
            hess[i, 1, 0] = hess[i, 0, 1]
        d = wi * 2.0 * kap / o
        hess[i, 2, 2] = d
        hess[i, 3, 3] = d
        e = -wi * 2.0 * kap / (o * o)
        hess[i, 2, 4] = e * ax
        hess[i, 4, 2] = e * ax
        hess[i, 3, 4] = e * ay
        hess[i, 4, 3] = e * ay
        hess[i, 4, 4] = wi * 2.0 * (l2 + kap * a2) / (o * o * o)
    return val, grad, hess


# --------------------------------------------------------------------------
# latency rows  bu/Ru(q) + bd/Rd(q) - budget  with tangent rate bounds
# R(q) = r0 - c1 (|q - p|^2 - s0). Outside the domain R <= 0 the value is +inf.
# --------------------------------------------------------------------------

def latency_rows_np(q, p, s0, r0u, c1u, bu, r0d, c1d, bd, budget):
    m = q.shape[0]
    d = q - p
    s = np.sum(d * d, axis=1)
    ru = r0u - c1u * (s - s0)
    rd = r0d - c1d * (s - s0)
    bad = (ru <= 0) | (rd <= 0)
    ru = np.where(bad, 1.0, ru)
    rd = np.where(bad, 1.0, rd)
    val = bu / ru + bd / rd - budget
    # d(b/R)/dq = (2 b c1 / R^2) d
    gu = 2.0 * bu * c1u / ru ** 2
    gd = 2.0 * bd * c1d / rd ** 2
    grad = (gu + gd)[:, None] * d
    # Hessian: (8 b c1^2 / R^3) d d^T + (2 b c1 / R^2) I
    hu = 8.0 * bu * c1u ** 2 / ru ** 3
    hd = 8.0 * bd * c1d ** 2 / rd ** 3
    hess = (hu + hd)[:, None, None] * d[:, :, None] * d[:, None, :]
    hess += (gu + gd)[:, None, None] * np.eye(2)[None]
    val = np.where(bad, np.inf, val)
    return val, grad, hess


def _latency_rows_loop(q, p, s0, r0u, c1u, bu, r0d, c1d, bd, budget):
    m = q.shape[0]
    val = np.empty(m)
    grad = np.zeros((m, 2))
    hess = np.zeros((m, 2, 2))
    for i in range(m):
        dx = q[i, 0] - p[i, 0]
        dy = q[i, 1] - p[i, 1]
        s = dx * dx + dy * dy
        ru = r0u[i] - c1u[i] * (s - s0[i])
        rd = r0d[i] - c1d[i] * (s - s0[i])
        if ru <= 0 or rd <= 0:
            val[i] = np.inf
            continue
        val[i] = bu[i] / ru + bd[i] / rd - budget[i]
        g = 2.0 * bu[i] * c1u[i] / (ru * ru) + 2.0 * bd[i] * c1d[i] / (rd * rd)
        h = 8.0 * bu[i] * c1u[i] ** 2 / (ru * ru * ru) + 8.0 * bd[i] * c1d[i] ** 2 / (rd * rd * rd)
        grad[i, 0] = g * dx
        grad[i, 1] = g * dy
        hess[i, 0, 0] = h * dx * dx + g
        hess[i, 1, 1] = h * dy * dy + g
        hess[i, 0, 1] = h * dx * dy
        hess[i, 1, 0] = hess[i, 0, 1]
    return val, grad, hess


# --------------------------------------------------------------------------
# private latency as a function of the (relaxed) decision z, elementwise
# --------------------------------------------------------------------------

def decision_latency_np(z, bi, bo, vbar, fk, FL, FU, wu, su_l, su_u, wd, sd_l, sd_u):
    """bi/Rul(z) + vbar/(fk(z FL + (1-z) FU)) + bo/Rdl(z); s*_l/s*_u are SNRs."""
    rul = wu * np.log2(1.0 + z * su_l + (1.0 - z) * su_u)
    rdl = wd * np.log2(1.0 + z * sd_l + (1.0 - z) * sd_u)
    return bi / rul + vbar / (fk * (z * FL + (1.0 - z) * FU)) + bo / rdl


def _decision_latency_loop(z, bi, bo, vbar, fk, FL, FU, wu, su_l, su_u, wd, sd_l, sd_u):
    out = np.empty(z.shape[0])
    inv_ln2 = 1.0 / np.log(2.0)
    for i in range(z.shape[0]):
        zi = z[i]
        rul = wu * np.log1p(zi * su_l[i] + (1.0 - zi) * su_u[i]) * inv_ln2
        rdl = wd * np.log1p(zi * sd_l[i] + (1.0 - zi) * sd_u[i]) * inv_ln2
        out[i] = bi[i] / rul + vbar[i] / (fk[i] * (zi * FL + (1.0 - zi) * FU)) + bo[i] / rdl
    return out


if _HAVE_NUMBA:
    _energy_rows_nb = njit(cache=True)(_energy_rows_loop)
    _latency_rows_nb = njit(cache=True)(_latency_rows_loop)
    _decision_latency_nb = njit(cache=True)(_decision_latency_loop)
else:  # pragma: no cover
    _energy_rows_nb = _energy_rows_loop
    _latency_rows_nb = _latency_rows_loop
    _decision_latency_nb = _decision_latency_loop


IMPLEMENTATIONS = {
    "numpy": {
        "energy_rows": energy_rows_np,
        "latency_rows": latency_rows_np,
        "decision_latency": decision_latency_np,
    },
    "numba": {
        "energy_rows": _energy_rows_nb,
        "latency_rows": _latency_rows_nb,
        "decision_latency": _decision_latency_nb,
    },
}


def backend() -> str:
    return "numba" if _use_numba() else "numpy"


def _dispatch(name):
    def call(*args):
        args = tuple(np.ascontiguousarray(x, dtype=float) if isinstance(x, np.ndarray) else float(x)
                     for x in args)
        return IMPLEMENTATIONS[backend()][name](*args)
    call.__name__ = name
    return call


energy_rows = _dispatch("energy_rows")
latency_rows = _dispatch("latency_rows")
decision_latency = _dispatch("decision_latency")
