"""Linear-program and smooth convex-program solvers for the subproblems.

``solve_lp`` wraps the HiGHS solver shipped with scipy. ``solve_convex`` is a
log-barrier interior-point method with equality-constrained Newton steps on a
sparse KKT system. Constraint rows are supplied as vectorised *atoms*: each atom
owns an integer support array (m, d) and returns per-row values, gradients
(m, d) and Hessians (m, d, d).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from .errors import InfeasibleError

TOL_FEAS = 1e-7
TOL_KKT = 1e-6
MAX_ITER = 500


@dataclass
class Solution:
    x: np.ndarray
    objective: float
    status: str  # optimal | infeasible | unbounded | iteration_limit
    stationarity: float = 0.0
    violation: float = 0.0
    iterations: int = 0


# --------------------------------------------------------------------------
# linear programs
# --------------------------------------------------------------------------

@dataclass
class LinearProgram:
    """min (or max) c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub."""

    c: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    bounds: list | None = None  # (lo, hi) pairs, None for unbounded side
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        n = self.c.size
        for A, b, name in ((self.A_ub, self.b_ub, "ub"), (self.A_eq, self.b_eq, "eq")):
            if A is not None:
                if A.shape[1] != n or A.shape[0] != len(b):
                    raise ValueError(f"A_{name} has shape {A.shape}, expected (len(b_{name}), {n})")
        if self.bounds is not None and len(self.bounds) != n:
            raise ValueError("bounds length mismatch")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("non-finite objective coefficients")

    def violation(self, x) -> float:
        x = np.asarray(x, float)
        v = 0.0
        if self.A_ub is not None:
            v = max(v, float(np.max(self.A_ub @ x - self.b_ub, initial=0.0)))
        if self.A_eq is not None:
            v = max(v, float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0)))
        if self.bounds is not None:
            for xi, (lo, hi) in zip(x, self.bounds):
                if lo is not None:
                    v = max(v, lo - xi)
                if hi is not None:
                    v = max(v, xi - hi)
        return v


def solve_lp(lp: LinearProgram, tol: float = TOL_FEAS) -> Solution:
    sign = -1.0 if lp.maximize else 1.0
    res = linprog(sign * lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                  bounds=lp.bounds if lp.bounds is not None else (None, None),
                  method="highs",
                  options={"primal_feasibility_tolerance": tol,
                           "dual_feasibility_tolerance": tol})
    n = lp.c.size
    if res.status == 2:
        return Solution(np.full(n, np.nan), np.nan, "infeasible")
    if res.status == 3:
        return Solution(np.full(n, np.nan), sign * -np.inf, "unbounded")
    if res.status == 1:
        x = res.x if res.x is not None else np.full(n, np.nan)
        return Solution(x, float(lp.c @ x), "iteration_limit")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.asarray(res.x, float)
    return Solution(x, float(lp.c @ x), "optimal", 0.0, lp.violation(x), int(res.nit))


# --------------------------------------------------------------------------
# smooth convex programs
# --------------------------------------------------------------------------

@dataclass
class Atom:
    """Vectorised convex rows. ``fn(xs)`` maps (m, d) to (val, grad, hess).

    As an objective atom its values are summed; as a constraint atom each row
    is a constraint ``val <= 0``. Rows may return +inf outside their domain.
    """

    support: np.ndarray
    fn: Callable
    name: str = ""
    scale: float = 1.0  # constraint rows are divided by this for conditioning

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, dtype=np.int64))


@dataclass
class ConvexSubproblem:
    n: int
    objective: list = field(default_factory=list)
    linear_objective: np.ndarray | None = None
    constraints: list = field(default_factory=list)
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    name: str = "convex"

    def objective_value(self, x) -> float:
        x = np.asarray(x, float)
        f = 0.0 if self.linear_objective is None else float(self.linear_objective @ x)
        for at in self.objective:
            f += float(np.sum(at.fn(x[at.support])[0]))
        return f

    def constraint_values(self, x) -> np.ndarray:
        """Stacked ``g(x) <= 0`` rows (unscaled), nonlinear then linear."""
        x = np.asarray(x, float)
        parts = [at.fn(x[at.support])[0] for at in self.constraints]
        if self.A_ub is not None:
            parts.append(self.A_ub @ x - self.b_ub)
        return np.concatenate(parts) if parts else np.zeros(0)

    def violation(self, x) -> float:
        g = self.constraint_values(x)
        v = float(np.max(g, initial=0.0))
        if self.A_eq is not None:
            v = max(v, float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0)))
        return v


class _KKTPattern:
    """Fixed sparsity pattern of the barrier KKT matrix.

    Raw (row, col, value) triplets produced per Newton step are folded into the
    CSC data array with a precomputed scatter map, so no sparse matrix has to be
    rebuilt from triplets inside the loop.
    """

    def __init__(self, n, neq, raw_rows, raw_cols, A_eq_y):
        ntot = n + neq
        rows = [raw_rows, np.arange(n)]  # diagonal kept for the ridge
        cols = [raw_cols, np.arange(n)]
        if neq:
            Ac = sp.coo_matrix(A_eq_y)
            rows += [Ac.row + n, Ac.col]
            cols += [Ac.col, Ac.row + n]
            self.eq_data = np.concatenate([Ac.data, Ac.data])
        else:
            self.eq_data = np.zeros(0)
        r = np.concatenate(rows).astype(np.int64)
        c = np.concatenate(cols).astype(np.int64)
        keys = c * ntot + r  # column-major order
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.inverse = inverse
        self.nnz = uniq.size
        self.indices = (uniq % ntot).astype(np.int32)
        col_of = uniq // ntot
        self.indptr = np.searchsorted(col_of, np.arange(ntot + 1)).astype(np.int32)
        self.n_raw = raw_rows.size
        self.n = n
        self.ntot = ntot

    def matrix(self, raw_vals, ridge):
        vals = np.concatenate([raw_vals, np.full(self.n, ridge), self.eq_data])
        data = np.bincount(self.inverse, weights=vals, minlength=self.nnz)
        return sp.csc_matrix((data, self.indices, self.indptr), shape=(self.ntot, self.ntot))


class _Barrier:
    """Scaled objective + log-barrier evaluator for a ConvexSubproblem."""

    def __init__(self, p: ConvexSubproblem, s: np.ndarray, f_norm: float, offsets):
        self.p, self.s, self.f_norm = p, s, f_norm
        self.offsets = offsets  # list aligned with constraints (+ linear block)
        rows, cols = [], []
        for at in list(p.objective) + list(p.constraints):
            d = at.support.shape[1]
            rows.append(np.repeat(at.support, d, axis=1).ravel())
            cols.append(np.tile(at.support, (1, d)).ravel())
        self.A_ub = None
        if p.A_ub is not None:
            A = sp.coo_matrix(p.A_ub)
            self.A_ub = sp.csr_matrix(p.A_ub)
            # pairs of nonzeros sharing a row give the A^T D A pattern
            order = np.argsort(A.row, kind="stable")
            ar, ac, av = A.row[order], A.col[order], A.data[order]
            starts = np.searchsorted(ar, np.arange(A.shape[0] + 1))
            pr, pc, pv, prow = [], [], [], []
            for i in range(A.shape[0]):
                sl = slice(starts[i], starts[i + 1])
                cc, vv = ac[sl], av[sl]
                pr.append(np.repeat(cc, cc.size))
                pc.append(np.tile(cc, cc.size))
                pv.append(np.outer(vv, vv).ravel())
                prow.append(np.full(cc.size * cc.size, i))
            rows.append(np.concatenate(pr) if pr else np.zeros(0, int))
            cols.append(np.concatenate(pc) if pc else np.zeros(0, int))
            self.lin_pair_vals = np.concatenate(pv) if pv else np.zeros(0)
            self.lin_pair_rows = np.concatenate(prow) if prow else np.zeros(0, int)
        self.raw_rows = np.concatenate(rows) if rows else np.zeros(0, int)
        self.raw_cols = np.concatenate(cols) if cols else np.zeros(0, int)
        self.raw_scale = s[self.raw_rows] * s[self.raw_cols]
        self.neq = 0 if p.A_eq is None else p.A_eq.shape[0]
        self.A_eq_y = (sp.csr_matrix(p.A_eq) @ sp.diags(s)).tocsc() if self.neq else None
        self.pattern = _KKTPattern(p.n, self.neq, self.raw_rows, self.raw_cols, self.A_eq_y)

    def rows(self, x):
        """Scaled constraint values minus offsets (must stay < 0)."""
        out = []
        for at, off in zip(self.p.constraints, self.offsets):
            out.append(at.fn(x[at.support])[0] / at.scale - off)
        if self.A_ub is not None:
            out.append((self.A_ub @ x - self.p.b_ub) - self.offsets[-1])
        return np.concatenate(out) if out else np.zeros(0)

    def objective(self, x):
        return self.p.objective_value(x) / self.f_norm

    def phi(self, x, t):
        g = self.rows(x)
        if not np.all(g < 0):
            return np.inf
        return t * self.objective(x) - np.sum(np.log(-g))

    def derivatives(self, x, t):
        """Gradient (scaled variables) and raw Hessian values on the pattern."""
        p, s = self.p, self.s
        grad = np.zeros(p.n)
        vals = []
        if p.linear_objective is not None:
            grad += t * p.linear_objective / self.f_norm
        for at in p.objective:
            _, g, h = at.fn(x[at.support])
            np.add.at(grad, at.support.ravel(), (t / self.f_norm * g).ravel())
            vals.append((t / self.f_norm * h).ravel())
        for at, off in zip(p.constraints, self.offsets):
            val, g, h = at.fn(x[at.support])
            val = val / at.scale - off
            g = g / at.scale
            h = h / at.scale
            inv = -1.0 / val
            np.add.at(grad, at.support.ravel(), (inv[:, None] * g).ravel())
            hh = inv[:, None, None] * h + (inv ** 2)[:, None, None] * g[:, :, None] * g[:, None, :]
            vals.append(hh.ravel())
        if self.A_ub is not None:
            slack = -((self.A_ub @ x - p.b_ub) - self.offsets[-1])
            inv = 1.0 / slack
            grad += self.A_ub.T @ inv
            vals.append(self.lin_pair_vals * inv[self.lin_pair_rows] ** 2)
        raw = np.concatenate(vals) if vals else np.zeros(0)
        return grad * s, raw * self.raw_scale


def _dump(p: ConvexSubproblem, x0, sol):
    d = os.environ.get("SAGINMEC_DUMP_DIR")
    if not d:
        return
    os.makedirs(d, exist_ok=True)
    existing = len([f for f in os.listdir(d) if f.startswith(p.name)])
    path = os.path.join(d, f"{p.name}_{existing:04d}.txt")
    with open(path, "w") as fh:
        fh.write(f"problem {p.name}\nvariables {p.n}\n")
        fh.write(f"objective atoms {[a.name for a in p.objective]}\n")
        fh.write(f"constraint atoms {[(a.name, len(a.support)) for a in p.constraints]}\n")
        fh.write(f"linear rows {0 if p.A_ub is None else p.A_ub.shape[0]}\n")
        fh.write(f"equality rows {0 if p.A_eq is None else p.A_eq.shape[0]}\n")
        fh.write(f"start objective {p.objective_value(x0)!r}\n")
        fh.write(f"status {sol.status} objective {sol.objective!r} "
                 f"stationarity {sol.stationarity!r} violation {sol.violation!r} "
                 f"iterations {sol.iterations}\n")
        fh.write("x " + " ".join(repr(float(v)) for v in sol.x) + "\n")


def _min_norm(A, r, weights=None):
    """Minimum weighted-norm solution of ``A d = r`` via the normal equations."""
    A = sp.csr_matrix(A)
    Aw = A if weights is None else A @ sp.diags(weights)
    M = (Aw @ Aw.T).tocsc()
    lam = splu(M).solve(r)
    return Aw.T @ lam if weights is None else (Aw.T @ lam) * weights


def project_affine(A_eq, b_eq, x, s=None):
    """Least-change (in scaled units) correction of ``x`` onto ``A_eq x = b_eq``."""
    x = np.array(x, dtype=float)
    if A_eq is None or A_eq.shape[0] == 0:
        return x
    # a couple of refinement passes recover the accuracy lost to the normal equations
    for _ in range(3):
        r = b_eq - A_eq @ x
        if np.max(np.abs(r)) <= 1e-13 * max(1.0, np.max(np.abs(b_eq), initial=0.0)):
            break
        x = x + _min_norm(A_eq, r, s)
    return x


def solve_convex(p: ConvexSubproblem, start, tol_feas: float = TOL_FEAS,
                 tol_kkt: float = TOL_KKT, max_iter: int = MAX_ITER,
                 relax: float = 1e-10) -> Solution:
    """Minimise a smooth convex program from a feasible start.

    Rows that are tight (or violated within ``tol_feas``) at the start are
    relaxed by ``relax`` in scaled units so that the start is strictly
    interior. The returned point is never worse than the start.
    """
    x0 = np.array(start.x if isinstance(start, Solution) else start, dtype=float)
    if x0.shape != (p.n,):
        raise ValueError(f"start has shape {x0.shape}, expected ({p.n},)")
    s = np.ones(p.n) if p.x_scale is None else np.asarray(p.x_scale, float)

    if p.A_eq is not None and p.A_eq.shape[0]:
        # small drift is left to the Newton iterations; projecting it away could
        # push rows that are tight at the start over their bound
        if np.max(np.abs(p.b_eq - p.A_eq @ x0)) > 1e-6 * max(1.0, np.max(np.abs(p.b_eq))):
            x0 = project_affine(p.A_eq, p.b_eq, x0, s)

    offsets = []
    for at in p.constraints:
        val = at.fn(x0[at.support])[0] / at.scale
        if not np.all(np.isfinite(val)):
            raise ValueError(f"start outside the domain of constraint {at.name!r}")
        if np.max(val, initial=-np.inf) > tol_feas:
            raise InfeasibleError(
                f"start violates {at.name!r} by {np.max(val):.3e}")
        offsets.append(np.maximum(val + relax, 0.0))
    if p.A_ub is not None:
        val = p.A_ub @ x0 - p.b_ub
        if np.max(val, initial=-np.inf) > tol_feas:
            raise InfeasibleError(f"start violates linear rows by {np.max(val):.3e}")
        offsets.append(np.maximum(val + relax, 0.0))

    f0 = p.objective_value(x0)
    if not np.isfinite(f0):
        raise ValueError("objective not finite at the start (domain violation)")
    f_norm = max(abs(f0), 1e-12)
    bar = _Barrier(p, s, f_norm, offsets)
    m = sum(len(at.support) for at in p.constraints) + (0 if p.A_ub is None else p.A_ub.shape[0])
    neq = bar.neq
    Aeq_y = bar.A_eq_y

    y = x0 / s
    x = x0.copy()
    mu = 20.0
    t = max(1.0, m) if m else 1.0 / tol_kkt
    iters = 0
    status = "optimal"
    while True:
        # centering by damped Newton
        for _ in range(100):
            if iters >= max_iter:
                status = "iteration_limit"
                break
            iters += 1
            gy, raw = bar.derivatives(x, t)
            # tiny ridge keeps the factorisation well posed on flat directions
            ridge = 1e-12 * max(1.0, float(np.max(np.abs(raw), initial=0.0)))
            K = bar.pattern.matrix(raw, ridge)
            if neq:
                # the equality residual is fed back so round-off drift is corrected
                rhs = np.concatenate([-gy, p.b_eq - Aeq_y @ y])
            else:
                rhs = -gy
            try:
                sol = splu(K).solve(rhs)
            except RuntimeError:
                sol = sp.linalg.spsolve(K, rhs)
            dy = sol[: p.n]
            dec2 = float(-gy @ dy)
            if not np.isfinite(dec2) or dec2 / 2.0 <= 1e-10:
                break
            # backtracking with feasibility
            phi0 = bar.phi(x, t)
            step = 1.0
            while step > 1e-14:
                xt = (y + step * dy) * s
                phit = bar.phi(xt, t)
                if np.isfinite(phit) and phit <= phi0 - 0.25 * step * dec2:
                    break
                step *= 0.5
            if step <= 1e-14:
                break
            y = y + step * dy
            x = y * s
        if status != "optimal" or m == 0 or m / t < tol_kkt * 1e-2:
            break
        t *= mu

    # stationarity of the Lagrangian in scaled variables, relative to |grad f|
    gf = np.zeros(p.n)
    if p.linear_objective is not None:
        gf += p.linear_objective
    for at in p.objective:
        np.add.at(gf, at.support.ravel(), at.fn(x[at.support])[1].ravel())
    gf = gf * s / f_norm
    gb, _ = bar.derivatives(x, t)
    lag = gb / t
    if neq:
        # remove the component in the row space of the equality constraints
        lag = lag - _min_norm(Aeq_y, Aeq_y @ lag)
    stationarity = float(np.max(np.abs(lag), initial=0.0) / max(1.0, np.max(np.abs(gf), initial=0.0)))
    stationarity = max(stationarity, m / t if m else 0.0)
    f = p.objective_value(x)
    viol = p.violation(x)
    if f > f0 or not np.isfinite(f):
        x, f = x0, f0
        viol = p.violation(x0)
    if status == "optimal" and stationarity > tol_kkt:
        status = "iteration_limit"
    out = Solution(x, f, status, stationarity, viol, iters)
    _dump(p, x0, out)
    return out
