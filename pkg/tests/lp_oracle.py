"""Exhaustive basic-feasible-solution enumeration for small boxed LPs.

    max c.x  s.t.  A x <= b,  0 <= x <= u

A vertex has n active constraints: some rows of A at equality and the
remaining variables sitting on 0 or u. Every choice is solved directly.
"""
import itertools

import numpy as np


def enumerate_vertices(c, A, b, u, tol=1e-9):
    m, n = A.shape
    best, best_x = -np.inf, None
    for s in range(0, min(m, n) + 1):
        for rows in itertools.combinations(range(m), s):
            for free in itertools.combinations(range(n), s):
                fixed = [j for j in range(n) if j not in free]
                # every 0/u pattern on the fixed variables at once
                pats = np.array(list(itertools.product((0, 1), repeat=len(fixed))), float)
                X = np.zeros((pats.shape[0], n))
                if fixed:
                    X[:, fixed] = pats * u[fixed]
                if s:
                    M = A[np.ix_(rows, free)]
                    if abs(np.linalg.det(M)) < 1e-12:
                        continue
                    rhs = b[list(rows)][None, :] - X[:, fixed] @ A[np.ix_(rows, fixed)].T
                    X[:, free] = np.linalg.solve(M, rhs.T).T
                ok = (np.all(A @ X.T <= b[:, None] + tol, axis=0)
                      & np.all(X >= -tol, axis=1) & np.all(X <= u + tol, axis=1))
                if not np.any(ok):
                    continue
                vals = X[ok] @ c
                i = int(np.argmax(vals))
                if vals[i] > best:
                    best, best_x = float(vals[i]), X[ok][i]
    return best, best_x


def lp_rows(lp):
    """Stack every constraint of a LinearProgram as G x <= h."""
    n = lp.c.size
    G, h = [], []
    if lp.A_ub is not None:
        G.append(np.asarray(lp.A_ub.toarray() if hasattr(lp.A_ub, "toarray") else lp.A_ub))
        h.append(np.asarray(lp.b_ub, float))
    if lp.A_eq is not None:
        Ae = np.asarray(lp.A_eq.toarray() if hasattr(lp.A_eq, "toarray") else lp.A_eq)
        G += [Ae, -Ae]
        h += [np.asarray(lp.b_eq, float), -np.asarray(lp.b_eq, float)]
    for j, (lo, hi) in enumerate(lp.bounds or [(None, None)] * n):
        e = np.zeros((1, n))
        e[0, j] = 1.0
        if lo is not None:
            G.append(-e)
            h.append(np.array([-lo], float))
        if hi is not None:
            G.append(e)
            h.append(np.array([hi], float))
    return np.vstack(G), np.concatenate(h)


def enumerate_general(c, G, h, tol=1e-9):
    """max c.x over {G x <= h} by trying every n-subset of rows as the active set."""
    m, n = G.shape
    best, best_x = -np.inf, None
    for rows in itertools.combinations(range(m), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12 * max(1.0, np.abs(M).max() ** n):
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + tol * (1 + np.abs(h))):
            v = float(c @ x)
            if v > best:
                best, best_x = v, x
    return best, best_x
