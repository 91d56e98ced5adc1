"""Independent reference implementations used by the tests.

Nothing here calls into the package's numerics: TV, the subproblem
objective, the PDE discretization and the convolution quadrature are
re-derived from scratch so that agreement means something.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np


# -- subproblem oracle --------------------------------------------------------
def grid_tv(values, shape, measures):
    """Anisotropic TV of a row-major field; ``measures[ax]`` per axis."""
    v = np.asarray(values).reshape((-1,) + tuple(shape))
    total = 0.0
    for ax, mu in enumerate(measures):
        d = np.abs(np.diff(v, axis=ax + 1)).reshape(v.shape[0], -1).sum(axis=1)
        total = total + mu * d
    return total


def subproblem_optimum(base, grad, cells, values, budget, alpha, shape, measures, volume):
    """Best predicted reduction over the whole feasible set.

    Enumerates every assignment on ``cells`` that changes at most
    ``budget`` units; the candidates are built subset by subset so the
    infeasible part of the product space is never formed.
    Returns ``(best_pred, best_field)``.
    """
    base = np.asarray(base, dtype=np.int64)
    grad = np.asarray(grad, dtype=float)
    cells = list(cells)
    W = np.asarray(values, dtype=np.int64)
    tv_base = float(grid_tv(base, shape, measures)[0])
    best_pred, best = 0.0, base.copy()
    n_alt = len(W) - 1
    if n_alt == 0:
        return best_pred, best
    alt_table = np.stack([W[W != base[c]] for c in range(base.size)])
    for j in range(1, min(budget, len(cells)) + 1):
        subsets = np.array(list(combinations(cells, j)), dtype=np.int64)
        picks = np.indices((n_alt,) * j).reshape(j, -1).T
        cand = np.repeat(base[None, :], subsets.shape[0] * picks.shape[0], axis=0)
        rows = np.arange(cand.shape[0])
        for t in range(j):
            col = np.repeat(subsets[:, t], picks.shape[0])
            choice = np.tile(picks[:, t], subsets.shape[0])
            cand[rows, col] = alt_table[col, choice]
        used = np.abs(cand - base[None, :]).sum(axis=1)
        cand = cand[used <= budget]
        if cand.shape[0] == 0:
            continue
        lin = volume * ((base[None, :] - cand) * grad[None, :]).sum(axis=1)
        pred = lin + alpha * (tv_base - grid_tv(cand, shape, measures))
        i = int(np.argmax(pred))
        if pred[i] > best_pred:
            best_pred, best = float(pred[i]), cand[i].copy()
    return best_pred, best


# -- convolution quadrature ---------------------------------------------------
def conv1d_objective_constant_one(n, tau=0.1):
    """F(w = 1) for the deconvolution benchmark on (-1, 1) via the geometric
    series of the exponential kernel at the midpoints."""
    h = 2.0 / n
    t = -1.0 + (np.arange(n) + 0.5) * h
    q = np.exp(-h / tau)
    m = np.arange(n)
    conv = h * q * (1 - q**m) / (1 - q)
    f = 0.2 * np.cos(2 * np.pi * t - 0.25) * np.exp(t)
    return 0.5 * h * float(np.sum((conv - f) ** 2))


# -- dense convection-diffusion reference -------------------------------------
def _velocity(x, y):
    return np.sin(np.pi * x), np.cos(2 * np.pi * y)


def _target_velocity(x, y):
    return -y, 2 * x


def _source(x, y):
    return np.sin(2 * np.pi * (x + y)) + 3.0


def _bottom(x):
    return np.sin(2 * np.pi * (x - 0.25)) if 0.25 < x < 0.75 else 0.0


def _target_w(x, y):
    if 0 < x < 0.35 and 0 < y < 0.35:
        return 2.5 - 4 * (x - 0.35) ** 3
    return -6 * (y - 0.35) ** 3


def dense_state(n, w_cells, eps=0.04, c2=2.0, velocity=_velocity):
    """Nodal state of the convection-diffusion problem, assembled node by
    node into a dense matrix over all ``(n+1)^2`` vertices."""
    h = 1.0 / n
    w = np.asarray(w_cells, dtype=float).reshape(n, n)
    N = n + 1
    idx = lambda i, j: i * N + j  # noqa: E731
    A = np.zeros((N * N, N * N))
    b = np.zeros(N * N)
    for i in range(N):
        for j in range(N):
            r = idx(i, j)
            x, y = i * h, j * h
            if i == 0 or i == n or j == 0:
                A[r, r] = 1.0
                b[r] = _bottom(x) if (j == 0 and 0 < i < n) else 0.0
                continue
            jn = j + 1 if j < n else j - 1  # mirrored ghost on the top edge
            nb = {"E": idx(i + 1, j), "W": idx(i - 1, j), "N": idx(i, jn), "S": idx(i, j - 1)}
            A[r, r] += 4 * eps / h**2
            for k in nb.values():
                A[r, k] -= eps / h**2
            bx, by = velocity(x, y)
            for beta, plus, minus in ((bx, "E", "W"), (by, "N", "S")):
                if abs(beta) * h / eps <= 2:
                    A[r, nb[plus]] += beta / (2 * h)
                    A[r, nb[minus]] -= beta / (2 * h)
                elif beta > 0:
                    A[r, r] += beta / h
                    A[r, nb[minus]] -= beta / h
                else:
                    A[r, nb[plus]] += beta / h
                    A[r, r] -= beta / h
            adj = [w[ci, cj] for ci in (i - 1, i) for cj in (j - 1, j) if 0 <= ci < n and 0 <= cj < n]
            A[r, r] += c2 * sum(adj) / len(adj)
            b[r] = _source(x, y)
    return np.linalg.solve(A, b).reshape(N, N)


def dense_target_state(n, eps=0.04, c2=2.0):
    h = 1.0 / n
    c = (np.arange(n) + 0.5) * h
    wt = np.array([[_target_w(x, y) for y in c] for x in c])
    return dense_state(n, wt, eps, c2, velocity=_target_velocity)


def dense_objective(n, w_cells, eps=0.04, c2=2.0):
    u = dense_state(n, w_cells, eps, c2)
    ud = dense_target_state(n, eps, c2)
    h = 1.0 / n
    wts = np.full((n + 1, n + 1), h * h)
    wts[:, n] *= 0.5
    wts[0, :] = wts[n, :] = 0.0
    wts[:, 0] = 0.0
    return 0.5 * float(np.sum(wts * (u - ud) ** 2))
