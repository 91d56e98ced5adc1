"""Exact solvers for the patch trust-region subproblem.

Given an iterate ``base``, a gradient ``g``, a patch ``D``, a radius and
the TV weight ``alpha``, the subproblem is::

    min_w  (g, w - base) + alpha TV(w) - alpha TV(base)
    s.t.   ||w - base||_L1 <= radius,  w = base off D,  w in W on D.

Because controls are integers, the L1 constraint is a budget of
``floor(radius / cell_volume)`` unit changes, which every solver below uses
as an exact integer constraint.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .control import ControlField, ValueSet, jump_counts
from .exceptions import ContractViolation, InvalidArgument, PatchTooLarge, SolverFailure
from .grid import Grid, exact, grid_from_dict
from .patches import Patch, patch_from_cells

DFS_CAP = 25


@dataclass(frozen=True, eq=False)
class TrustRegionSubproblem:
    base: ControlField
    grad: np.ndarray
    patch: Patch
    radius: float
    alpha: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument(f"trust-region radius must be positive, got {self.radius}")
        if not self.alpha >= 0:
            raise InvalidArgument(f"alpha must be nonnegative, got {self.alpha}")
        g = np.asarray(self.grad, dtype=float).ravel()
        if g.shape[0] != self.base.grid.n_cells:
            raise InvalidArgument("gradient and control live on different grids")
        if not np.all(np.isfinite(g)):
            raise InvalidArgument("gradient has non-finite entries")
        object.__setattr__(self, "grad", g)

    @property
    def grid(self) -> Grid:
        return self.base.grid

    @property
    def value_set(self) -> ValueSet:
        return self.base.value_set

    @property
    def budget_units(self) -> int:
        """Admissible number of unit changes, capped by what the patch can use."""
        k = math.floor(exact(self.radius) / self.grid.cell_volume_exact)
        return int(min(k, self.patch.size * self.value_set.span))


@dataclass
class CandidateStep:
    trial: ControlField
    pred: float
    ared: float | None = None
    key: tuple = (0, 0)
    solver: str = ""
    stats: dict = field(default_factory=dict)


def pred_of(sub: TrustRegionSubproblem, trial: ControlField) -> float:
    """Predicted reduction ``(g, base - trial) + alpha TV(base) - alpha TV(trial)``.

    Only interfaces touching the patch are evaluated; the exterior TV
    contributions of base and trial are identical and cancel.
    """
    base = sub.base.values
    tv_ = trial.values
    off = np.ones(base.size, dtype=bool)
    off[sub.patch.cells] = False
    if np.any(base[off] != tv_[off]):
        raise ContractViolation("trial differs from the base outside the patch")
    cells = sub.patch.cells
    lin = sub.grid.cell_volume * float(np.dot(sub.grad[cells], (base[cells] - tv_[cells]).astype(float)))
    touch = sub.patch.touching_interfaces
    dj = jump_counts(sub.grid, base, touch) - jump_counts(sub.grid, tv_, touch)
    tvd = 0.0
    for mu, d in zip(sub.grid.axis_measures, dj):
        tvd += mu * int(d)
    return lin + sub.alpha * tvd


def _base_step(sub, solver, stats=None) -> CandidateStep:
    return CandidateStep(sub.base, 0.0, solver=solver, stats=stats or {})


def _finalize(sub, trial_values, solver, stats) -> CandidateStep:
    trial = ControlField(sub.grid, trial_values, sub.value_set, check=False)
    units = int(np.abs(trial.values - sub.base.values).sum())
    if units > sub.budget_units:
        raise ContractViolation(f"{solver}: trial uses {units} budget units, only {sub.budget_units} allowed")
    pred = pred_of(sub, trial)
    if not pred > 0:
        # the base is optimal; keep it so that stationarity is reported cleanly
        return _base_step(sub, solver, stats)
    return CandidateStep(trial, pred, solver=solver, stats=stats)


def _local_costs(sub):
    """Per patch cell and value: linear cost and budget units."""
    cells = sub.patch.cells
    W = sub.value_set.array
    wb = sub.base.values[cells]
    delta = W[None, :] - wb[:, None]
    lin = sub.grid.cell_volume * sub.grad[cells][:, None] * delta.astype(float)
    bud = np.abs(delta)
    return lin, bud


def _interface_terms(sub):
    """Split the patch's touching interfaces into internal pairs (local ids)
    and exterior costs per local cell and value."""
    grid = sub.grid
    cells = sub.patch.cells
    local = np.full(grid.n_cells, -1, dtype=np.int64)
    local[cells] = np.arange(cells.size)
    W = sub.value_set.array
    ext = np.zeros((cells.size, W.size))
    internal = []
    for e in sub.patch.boundary_interfaces:
        a, b = grid.iface_cells[e]
        mu = grid.iface_measure[e]
        inside, outside = (a, b) if local[a] >= 0 else (b, a)
        ext[local[inside]] += sub.alpha * mu * np.abs(W - sub.base.values[outside])
    for e in sub.patch.interior_interfaces:
        a, b = grid.iface_cells[e]
        internal.append((int(local[a]), int(local[b]), float(sub.alpha * grid.iface_measure[e])))
    return internal, ext


# -- 1D dynamic programming ---------------------------------------------------
def solve_dp_1d(sub: TrustRegionSubproblem) -> CandidateStep:
    """Shortest path through the layered graph of (value, used budget) states.

    One layer per patch cell; arcs between consecutive cells carry the
    linear cost of the new value plus the TV jump.  Ties prefer the smaller
    value index, then the smaller budget.
    """
    grid = sub.grid
    if grid.dim != 1:
        raise InvalidArgument("the DP solver needs a 1D grid")
    cells = sub.patch.cells
    n = cells.size
    if n == 0:
        return _base_step(sub, "dp", {"states": 0})
    s, e = int(cells[0]), int(cells[-1]) + 1
    if e - s != n:
        raise InvalidArgument("the DP solver needs a contiguous patch")
    K = sub.budget_units
    if K == 0:
        return _base_step(sub, "dp", {"states": 0})

    W = sub.value_set.array
    M = W.size
    wb = sub.base.values
    a = sub.alpha * grid.axis_measures[0]
    lin, bud = _local_costs(sub)
    pair = a * np.abs(W[:, None] - W[None, :]).astype(float)
    entry = a * np.abs(W - wb[s - 1]).astype(float) if s > 0 else np.zeros(M)
    exit_ = a * np.abs(W - wb[e]).astype(float) if e < grid.n_cells else np.zeros(M)

    V = np.full((M, K + 1), np.inf)
    for m in range(M):
        if bud[0, m] <= K:
            V[m, bud[0, m]] = lin[0, m] + entry[m]
    back = np.zeros((n, M, K + 1), dtype=np.int8)
    for layer in range(1, n):
        T = V[None, :, :] + pair[:, :, None]
        arg = T.argmin(axis=1)
        best = np.take_along_axis(T, arg[:, None, :], axis=1)[:, 0, :]
        V = np.full((M, K + 1), np.inf)
        for m in range(M):
            b = bud[layer, m]
            if b > K:
                continue
            V[m, b:] = best[m, : K + 1 - b] + lin[layer, m]
            back[layer, m, b:] = arg[m, : K + 1 - b]

    total = V + exit_[:, None]
    m, u = divmod(int(np.argmin(total)), K + 1)
    choice = np.empty(n, dtype=np.int64)
    for layer in range(n - 1, -1, -1):
        choice[layer] = m
        prev = back[layer, m, u]
        u -= bud[layer, m]
        m = prev
    out = wb.copy()
    out[s:e] = W[choice]
    return _finalize(sub, out, "dp", {"states": int(n * M * (K + 1))})


# -- 2D depth-first search ----------------------------------------------------
def solve_dfs_2d(sub: TrustRegionSubproblem, cap: int = DFS_CAP) -> CandidateStep:
    """Depth-first enumeration over the patch cells in row-major order with
    bounding.

    The bound is the exact optimum of the remaining cells under the
    remaining budget when only their separable costs count (linear term and
    jumps to fixed cells outside the patch); jumps between patch cells are
    nonnegative and dropped.
    The incumbent starts at the base, and only strict improvements replace
    it, so the first optimum found in search order is returned.
    """
    cells = sub.patch.cells
    n = cells.size
    if n > cap:
        raise PatchTooLarge(f"patch-too-large: patch {sub.patch.id} has {n} cells, the DFS solver accepts at most {cap}; use more patches")
    K = sub.budget_units
    if n == 0 or K == 0:
        return _base_step(sub, "dfs", {"nodes": 0})

    W = sub.value_set.array.tolist()
    M = len(W)
    lin, bud = _local_costs(sub)
    internal, ext = _interface_terms(sub)
    earlier = [[] for _ in range(n)]
    for p, q, wgt in internal:
        lo, hi = min(p, q), max(p, q)
        earlier[hi].append((lo, wgt))
    own = lin + ext
    fixed = own.tolist()
    budl = bud.tolist()

    # bound[l][r]: best separable cost of cells l.. within r remaining units
    bound = np.zeros((n + 1, K + 1))
    for layer in range(n - 1, -1, -1):
        best_here = np.full(K + 1, np.inf)
        for m in range(M):
            b = bud[layer, m]
            if b <= K:
                best_here[b:] = np.minimum(best_here[b:], own[layer, m] + bound[layer + 1, : K + 1 - b])
        bound[layer] = best_here
    bound = bound.tolist()

    # raw cost of the base (touching-interface TV of the base plus zero linear part)
    wb = sub.base.values
    base_local = [W.index(int(v)) for v in wb[cells]]
    incumbent = sum(ext[i, base_local[i]] for i in range(n))
    incumbent += sum(wgt * abs(W[base_local[p]] - W[base_local[q]]) for p, q, wgt in internal)
    best = [incumbent, None]
    assign = [0] * n
    nodes = 0

    def rec(layer, acc, rem):
        nonlocal nodes
        nodes += 1
        if layer == n:
            if acc < best[0]:
                best[0] = acc
                best[1] = list(assign)
            return
        row_fixed = fixed[layer]
        row_bud = budl[layer]
        nxt = bound[layer + 1]
        for m in range(M):
            b = row_bud[m]
            if b > rem:
                continue
            cost = acc + row_fixed[m]
            wm = W[m]
            for q, wgt in earlier[layer]:
                cost += wgt * abs(wm - W[assign[q]])
            if cost + nxt[rem - b] >= best[0]:
                continue
            assign[layer] = m
            rec(layer + 1, cost, rem - b)

    rec(0, 0.0, K)
    stats = {"nodes": nodes}
    if best[1] is None:
        return _base_step(sub, "dfs", stats)
    out = wb.copy()
    out[cells] = np.asarray(W)[best[1]]
    return _finalize(sub, out, "dfs", stats)


# -- MILP (HiGHS) -------------------------------------------------------------
def solve_milp(sub: TrustRegionSubproblem, time_limit: float | None = None) -> CandidateStep:
    """One-hot integer program solved to zero relative gap with HiGHS.

    Used for patches beyond the DFS cap.  Jumps across internal interfaces
    are modeled with the usual pair of inequalities ``t >= +-(w_a - w_b)``.
    """
    cells = sub.patch.cells
    n = cells.size
    K = sub.budget_units
    if n == 0 or K == 0:
        return _base_step(sub, "milp", {"nodes": 0})
    W = sub.value_set.array.astype(float)
    M = W.size
    lin, bud = _local_costs(sub)
    internal, ext = _interface_terms(sub)
    ni = len(internal)
    nx = n * M
    c = np.concatenate([(lin + ext).ravel(), np.array([wgt for _, _, wgt in internal])])
    scale = float(np.abs(c).max()) or 1.0
    c = c / scale

    rows = []
    lb = []
    ub = []
    onehot = np.zeros((n, nx + ni))
    for i in range(n):
        onehot[i, i * M:(i + 1) * M] = 1.0
    rows.append(onehot)
    lb += [1.0] * n
    ub += [1.0] * n
    if ni:
        jump = np.zeros((2 * ni, nx + ni))
        for k, (p, q, _) in enumerate(internal):
            for sign, row in ((1.0, 2 * k), (-1.0, 2 * k + 1)):
                jump[row, p * M:(p + 1) * M] = -sign * W
                jump[row, q * M:(q + 1) * M] = sign * W
                jump[row, nx + k] = 1.0
        rows.append(jump)
        lb += [0.0] * (2 * ni)
        ub += [np.inf] * (2 * ni)
    budget = np.zeros((1, nx + ni))
    budget[0, :nx] = bud.ravel()
    rows.append(budget)
    lb.append(-np.inf)
    ub.append(float(K))
    A = np.vstack(rows)

    integrality = np.concatenate([np.ones(nx), np.zeros(ni)])
    bounds = Bounds(np.zeros(nx + ni), np.concatenate([np.ones(nx), np.full(ni, np.inf)]))
    options = {"mip_rel_gap": 0.0, "disp": False, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, constraints=LinearConstraint(A, lb, ub), integrality=integrality, bounds=bounds, options=options)
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"MILP subproblem on patch {sub.patch.id} failed: {res.message}")
    x = res.x[:nx].reshape(n, M)
    choice = np.argmax(x, axis=1)
    out = sub.base.values.copy()
    out[cells] = sub.value_set.array[choice]
    return _finalize(sub, out, "milp", {"nodes": int(getattr(res, "mip_node_count", 0) or 0)})


# -- brute force oracle -------------------------------------------------------
def solve_bruteforce(sub: TrustRegionSubproblem, max_cells: int = 16, max_space: int = 2**24, chunk: int = 2**17) -> CandidateStep:
    """Exhaustive enumeration of every assignment on the patch (test oracle)."""
    cells = sub.patch.cells
    n = cells.size
    if n == 0:
        return _base_step(sub, "bruteforce", {"enumerated": 0})
    W = sub.value_set.array
    M = W.size
    if n > max_cells or M**n > max_space:
        raise InvalidArgument(f"brute force limited to {max_cells} cells and {max_space} assignments")
    K = sub.budget_units
    grid = sub.grid
    wb = sub.base.values
    g = sub.grad[cells]
    h = grid.cell_volume
    local = {int(c): i for i, c in enumerate(cells)}
    touch = sub.patch.touching_interfaces
    ends = grid.iface_cells[touch]
    mus = grid.iface_measure[touch]
    base_tv = float(np.dot(mus, np.abs(wb[ends[:, 0]] - wb[ends[:, 1]])))

    total = M**n
    best_val, best_code = 0.0, None
    powers = M ** np.arange(n, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        vals = W[(codes[:, None] // powers[None, :]) % M]
        delta = vals - wb[cells][None, :]
        feasible = np.abs(delta).sum(axis=1) <= K
        obj = h * (delta.astype(float) @ g)
        tv_new = np.zeros(codes.size)
        for (a, b), mu in zip(ends, mus):
            va = vals[:, local[int(a)]] if int(a) in local else wb[a]
            vb = vals[:, local[int(b)]] if int(b) in local else wb[b]
            tv_new += mu * np.abs(va - vb)
        obj += sub.alpha * (tv_new - base_tv)
        obj[~feasible] = np.inf
        i = int(np.argmin(obj))
        if obj[i] < best_val:
            best_val, best_code = obj[i], vals[i].copy()
    stats = {"enumerated": int(total)}
    if best_code is None:
        return _base_step(sub, "bruteforce", stats)
    out = wb.copy()
    out[cells] = best_code
    return _finalize(sub, out, "bruteforce", stats)


def solve(sub: TrustRegionSubproblem, method: str = "auto", dfs_cap: int = DFS_CAP) -> CandidateStep:
    """Dispatch to an exact solver.

    ``auto`` uses the DP in 1D, DFS for 2D patches within ``dfs_cap`` cells
    and the MILP beyond.  ``exact`` is the same without the MILP fallback,
    so oversized 2D patches raise :class:`PatchTooLarge`.
    """
    if method == "exact":
        method = "dp" if sub.grid.dim == 1 else "dfs"
    if method == "auto":
        if sub.grid.dim == 1:
            method = "dp"
        else:
            method = "dfs" if sub.patch.size <= dfs_cap else "milp"
    if method == "dp":
        return solve_dp_1d(sub)
    if method == "dfs":
        return solve_dfs_2d(sub, cap=dfs_cap)
    if method == "milp":
        return solve_milp(sub)
    if method == "bruteforce":
        return solve_bruteforce(sub)
    raise InvalidArgument(f"unknown subproblem solver {method!r}")


# -- serialization ------------------------------------------------------------
def subproblem_to_dict(sub: TrustRegionSubproblem) -> dict:
    return {
        "grid": sub.grid.to_dict(),
        "values": list(sub.value_set.values),
        "base": sub.base.values.tolist(),
        "grad": sub.grad.tolist(),
        "patch_cells": sub.patch.cells.tolist(),
        "radius": sub.radius,
        "alpha": sub.alpha,
    }


def subproblem_from_dict(d: dict) -> TrustRegionSubproblem:
    try:
        grid = grid_from_dict(d["grid"])
        vs = ValueSet(tuple(d["values"]))
        base = ControlField(grid, d["base"], vs)
        patch = patch_from_cells(grid, d.get("patch_cells", range(grid.n_cells)))
        return TrustRegionSubproblem(base, np.asarray(d["grad"], dtype=float), patch, float(d["radius"]), float(d["alpha"]))
    except (KeyError, TypeError) as exc:
        raise InvalidArgument(f"malformed subproblem instance: {exc!r}") from exc


def save_subproblem(path, sub: TrustRegionSubproblem) -> None:
    Path(path).write_text(json.dumps(subproblem_to_dict(sub)))


def load_subproblem(path) -> TrustRegionSubproblem:
    return subproblem_from_dict(json.loads(Path(path).read_text()))


def step_to_dict(step: CandidateStep) -> dict:
    return {
        "trial": step.trial.values.tolist(),
        "pred": step.pred,
        "solver": step.solver,
        "stats": step.stats,
    }
