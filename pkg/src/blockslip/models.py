"""Smooth parts F of the objective with their gradients.

All gradients are Riesz representatives with respect to the cell-volume
weighted inner product, i.e. ``(g, v) = cell_volume * sum(g * v)`` equals the
discrete directional derivative of F along v.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .control import ControlField, ValueSet
from .exceptions import InvalidArgument, SolverFailure
from .grid import Grid

_log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


def _as_float(w) -> np.ndarray:
    return np.asarray(w.values if isinstance(w, ControlField) else w, dtype=float)


class Model:
    """Interface shared by the forward models."""

    kind = "abstract"

    def __init__(self, grid: Grid):
        self.grid = grid

    def objective(self, w) -> float:
        raise NotImplementedError

    def gradient(self, w) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_bound(self, value_set: ValueSet | None = None) -> float:
        raise NotImplementedError

    def inner(self, g, v) -> float:
        """Cell-volume weighted L2 inner product."""
        return self.grid.cell_volume * float(np.dot(g, v))


class QuadraticModel(Model):
    """``F(w) = 1/2 ||w - target||^2`` in the cell-volume weighted L2 norm."""

    kind = "quadratic"

    def __init__(self, grid: Grid, target):
        super().__init__(grid)
        t = np.broadcast_to(np.asarray(target, dtype=float), (grid.n_cells,)).copy()
        t.setflags(write=False)
        self.target = t

    def objective(self, w) -> float:
        r = _as_float(w) - self.target
        return 0.5 * self.grid.cell_volume * float(r @ r)

    def gradient(self, w) -> np.ndarray:
        return _as_float(w) - self.target

    def lipschitz_bound(self, value_set=None) -> float:
        return 1.0 / self.grid.cell_volume


def exponential_kernel(tau: float):
    def k(s):
        s = np.asarray(s, dtype=float)
        return np.where(s >= 0, np.exp(-np.maximum(s, 0.0) / tau), 0.0)

    return k


def default_conv_target(t):
    return 0.2 * np.cos(2 * np.pi * t - 0.25) * np.exp(t)


class ConvolutionModel(Model):
    """Deconvolution benchmark ``F(w) = 1/2 ||k * w - f||^2`` on (-1, 1).

    The Volterra operator is collocated at cell midpoints,
    ``A[m, j] = h k(t_m - t_j)`` for ``t_j < t_m``, and the residual is
    integrated with the midpoint rule.
    """

    kind = "conv1d"

    def __init__(self, grid: Grid, tau: float = 0.1, kernel=None, target=None):
        if grid.dim != 1:
            raise InvalidArgument("the convolution model needs a 1D grid")
        if kernel is None and not tau > 0:
            raise InvalidArgument("kernel time constant tau must be positive")
        super().__init__(grid)
        self.tau = tau
        self.kernel = kernel if kernel is not None else exponential_kernel(tau)
        t = grid.centers[:, 0]
        h = grid.cell_volume
        diff = t[:, None] - t[None, :]
        A = np.where(diff > 0, h * self.kernel(diff), 0.0)
        A.setflags(write=False)
        self.A = A
        if target is None:
            f = default_conv_target(t)
        elif callable(target):
            f = np.asarray(target(t), dtype=float)
        else:
            f = np.broadcast_to(np.asarray(target, dtype=float), t.shape).copy()
        f.setflags(write=False)
        self.f = f

    def residual(self, w) -> np.ndarray:
        return self.A @ _as_float(w) - self.f

    def objective(self, w) -> float:
        r = self.residual(w)
        return 0.5 * self.grid.cell_volume * float(r @ r)

    def gradient(self, w) -> np.ndarray:
        return self.A.T @ self.residual(w)

    def lipschitz_bound(self, value_set=None) -> float:
        # ||A^T A d||_inf <= max|A^T A| * sum|d| = max|A^T A| * ||d||_L1 / h
        return float(np.abs(self.A.T @ self.A).max()) / self.grid.cell_volume


# -- 2D convection-diffusion ------------------------------------------------
def default_velocity(x, y):
    return np.sin(np.pi * x), np.cos(2 * np.pi * y)


def target_velocity(x, y):
    return -y, 2 * x


def default_source(x, y):
    return np.sin(2 * np.pi * x + 2 * np.pi * y) + 3.0


def default_bottom(x):
    return np.where((x > 0.25) & (x < 0.75), np.sin(2 * np.pi * (x - 0.25)), 0.0)


def target_control(x, y):
    """Real-valued control that generates the tracking target."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    in_a = (x > 0) & (x < 0.35) & (y > 0) & (y < 0.35)
    return np.where(in_a, 2.5 - 4 * (x - 0.35) ** 3, -6 * (y - 0.35) ** 3)


class ConvectionDiffusionModel(Model):
    """Tracking-type objective for a controlled convection-diffusion-reaction
    equation on the unit square.

    ``-eps lap u + c1 . grad u + c2 w u = f`` with u = 0 on the left and
    right sides, Dirichlet data on the bottom and a homogeneous Neumann
    condition on the top.  Nodes sit on the cell vertices; the 5-point
    Laplacian is used with central convection where the cell Peclet number
    ``|c1_i| h / eps`` is at most 2 and first-order upwinding elsewhere.  The
    top Neumann row uses mirrored ghost nodes.  A node's reaction
    coefficient is the mean control of the cells sharing that vertex.
    """

    kind = "pde2d"

    def __init__(
        self,
        grid: Grid,
        epsilon: float = 4e-2,
        c2: float = 2.0,
        velocity=default_velocity,
        source=default_source,
        bottom=default_bottom,
        target_velocity=target_velocity,
        target_control=target_control,
        target_state=None,
        value_set: ValueSet | None = None,
    ):
        if grid.dim != 2:
            raise InvalidArgument("the convection-diffusion model needs a 2D grid")
        if grid.lower != (0.0, 0.0) or grid.upper != (1.0, 1.0):
            raise InvalidArgument("the convection-diffusion model is posed on (0, 1)^2")
        if not epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        super().__init__(grid)
        self.epsilon = float(epsilon)
        self.c2 = float(c2)
        self.velocity = velocity
        self.source = source
        self.bottom = bottom
        self.value_set = value_set or ValueSet((0, 1))
        self._setup_nodes()
        self._K0, self._rhs = self._assemble(velocity)
        self._target_velocity = target_velocity
        self._target_control = target_control
        self._ud_override = target_state
        self._cache: OrderedDict = OrderedDict()

    # -- discretization ---------------------------------------------------
    def _setup_nodes(self):
        n0, n1 = self.grid.shape
        self.hx, self.hy = self.grid.spacing
        self.node_shape = (n0 + 1, n1 + 1)
        ii, jj = np.meshgrid(np.arange(n0 + 1), np.arange(n1 + 1), indexing="ij")
        self.node_x = ii * self.hx
        self.node_y = jj * self.hy
        unknown = (ii >= 1) & (ii <= n0 - 1) & (jj >= 1)
        self._unknown = np.flatnonzero(unknown.ravel())
        self._n_unknown = self._unknown.size
        node_to_unknown = np.full((n0 + 1) * (n1 + 1), -1)
        node_to_unknown[self._unknown] = np.arange(self._n_unknown)
        self._node_to_unknown = node_to_unknown
        self._top = (jj.ravel()[self._unknown] == n1)

        # Dirichlet values on every node (zero where unknown)
        ud = np.zeros((n0 + 1, n1 + 1))
        ud[:, 0] = self.bottom(self.node_x[:, 0])
        ud[0, :] = 0.0
        ud[n0, :] = 0.0
        ud[unknown] = 0.0
        self._dirichlet_values = ud.ravel()

        # vertex -> cell averaging, restricted to unknown nodes
        rows, cols, vals = [], [], []
        iu = ii.ravel()[self._unknown]
        ju = jj.ravel()[self._unknown]
        for k, (i, j) in enumerate(zip(iu, ju)):
            cells = [(ci, cj) for ci in (i - 1, i) for cj in (j - 1, j) if 0 <= ci < n0 and 0 <= cj < n1]
            for ci, cj in cells:
                rows.append(k)
                cols.append(ci * n1 + cj)
                vals.append(1.0 / len(cells))
        self._P = sps.csr_matrix((vals, (rows, cols)), shape=(self._n_unknown, self.grid.n_cells))

        # trapezoidal nodal quadrature weights of the unknown nodes
        m = np.full(self._n_unknown, self.hx * self.hy)
        m[self._top] *= 0.5
        self._mass = m

    def _assemble(self, velocity):
        """Matrix without the reaction term, plus the right-hand side."""
        n0, n1 = self.grid.shape
        hx, hy, eps = self.hx, self.hy, self.epsilon
        ncol = (n1 + 1)
        nodes = self._unknown
        i = nodes // ncol
        j = nodes % ncol
        x = i * hx
        y = j * hy
        bx, by = velocity(x, y)
        bx = np.broadcast_to(np.asarray(bx, dtype=float), x.shape)
        by = np.broadcast_to(np.asarray(by, dtype=float), x.shape)
        top = j == n1
        # neighbor node ids; the top row's north neighbor is mirrored south
        east = nodes + ncol
        west = nodes - ncol
        south = nodes - 1
        north = np.where(top, nodes - 1, nodes + 1)

        coef_p = np.full(nodes.size, 2 * eps / hx**2 + 2 * eps / hy**2)
        coef = {
            "E": np.full(nodes.size, -eps / hx**2),
            "W": np.full(nodes.size, -eps / hx**2),
            "N": np.full(nodes.size, -eps / hy**2),
            "S": np.full(nodes.size, -eps / hy**2),
        }
        for b, h, plus, minus in ((bx, hx, "E", "W"), (by, hy, "N", "S")):
            upwind = np.abs(b) * h / eps > 2
            central = ~upwind
            coef[plus] = coef[plus] + np.where(central, b / (2 * h), 0.0)
            coef[minus] = coef[minus] - np.where(central, b / (2 * h), 0.0)
            pos = upwind & (b > 0)
            neg = upwind & (b < 0)
            coef_p = coef_p + np.where(pos, b / h, 0.0) - np.where(neg, b / h, 0.0)
            coef[minus] = coef[minus] - np.where(pos, b / h, 0.0)
            coef[plus] = coef[plus] + np.where(neg, b / h, 0.0)

        n_nodes = (n0 + 1) * (n1 + 1)
        rows = np.concatenate([np.arange(nodes.size)] * 5)
        cols = np.concatenate([nodes, east, west, north, south])
        vals = np.concatenate([coef_p, coef["E"], coef["W"], coef["N"], coef["S"]])
        full = sps.csr_matrix((vals, (rows, cols)), shape=(nodes.size, n_nodes))
        full.sum_duplicates()
        K0 = full[:, nodes].tocsc()
        rhs = np.broadcast_to(np.asarray(self.source(x, y), dtype=float), x.shape) - full @ self._dirichlet_values
        return K0, rhs

    def _system(self, w_cells, K0=None):
        K0 = self._K0 if K0 is None else K0
        react = self.c2 * (self._P @ np.asarray(w_cells, dtype=float))
        return (K0 + sps.diags(react)).tocsc()

    def _solve(self, K, rhs):
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise SolverFailure(f"sparse factorization failed: {exc}") from exc
        u = lu.solve(rhs)
        _check_residual(K, u, rhs, "state")
        return u, lu

    def _state_unknowns(self, w):
        wv = _as_float(w)
        key = wv.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        K = self._system(wv)
        u, lu = self._solve(K, self._rhs)
        self._cache[key] = (u, lu, K)
        if len(self._cache) > 4:
            self._cache.popitem(last=False)
        return u, lu, K

    def _to_nodal(self, u_unknown) -> np.ndarray:
        full = self._dirichlet_values.copy()
        full[self._unknown] = u_unknown
        return full.reshape(self.node_shape)

    # -- public operations ------------------------------------------------
    def state(self, w) -> np.ndarray:
        """Nodal state, shape ``(n0 + 1, n1 + 1)`` including boundary nodes."""
        return self._to_nodal(self._state_unknowns(w)[0])

    @cached_property
    def target_cell_control(self) -> np.ndarray:
        c = self.grid.centers
        return np.asarray(self._target_control(c[:, 0], c[:, 1]), dtype=float)

    @cached_property
    def _ud_unknown(self) -> np.ndarray:
        if self._ud_override is not None:
            return np.asarray(self._ud_override, dtype=float).ravel()[self._unknown]
        K0, rhs = self._assemble(self._target_velocity)
        K = self._system(self.target_cell_control, K0)
        u, _ = self._solve(K, rhs)
        u.setflags(write=False)
        return u

    def target_state(self) -> np.ndarray:
        return self._to_nodal(self._ud_unknown)

    def objective(self, w) -> float:
        u = self._state_unknowns(w)[0]
        r = u - self._ud_unknown
        return 0.5 * float(np.dot(self._mass * r, r))

    def gradient(self, w) -> np.ndarray:
        u, lu, K = self._state_unknowns(w)
        rhs = self._mass * (u - self._ud_unknown)
        p = lu.solve(rhs, trans="T")
        _check_residual(K.T, p, rhs, "adjoint")
        dF = -self.c2 * (self._P.T @ (u * p))
        return dF / self.grid.cell_volume

    def lipschitz_bound(self, value_set=None, n_samples: int = 16, safety: float = 2.0, seed: int = 0) -> float:
        """Sampled surrogate ``safety * 2 * max ||grad F(w)||_inf``.

        The maximum runs over the constant controls and ``n_samples`` random
        feasible controls; it is an estimate of the gradient bound, not a
        certified supremum.
        """
        vs = value_set or self.value_set
        rng = np.random.default_rng(seed)
        samples = [np.full(self.grid.n_cells, v) for v in vs.values]
        samples += [rng.choice(vs.array, size=self.grid.n_cells) for _ in range(n_samples)]
        c = max(float(np.abs(self.gradient(s)).max()) for s in samples)
        return safety * 2.0 * c


def _check_residual(K, x, rhs, what):
    nb = np.linalg.norm(rhs)
    res = np.linalg.norm(K @ x - rhs)
    if not np.all(np.isfinite(x)) or res > RESIDUAL_TOL * max(nb, np.finfo(float).tiny):
        if nb == 0 and res == 0:
            return
        raise SolverFailure(f"{what} solve: relative residual {res / max(nb, 1e-300):.3e} exceeds {RESIDUAL_TOL}")


# -- helpers ----------------------------------------------------------------
def gradient_check(model: Model, value_set: ValueSet, n_samples: int = 10, eps: float = 1e-5, seed: int = 0) -> float:
    """Largest central finite-difference discrepancy over random feasible
    points and integer directions, ``|(g,v) - fd| / max(1, |(g,v)|)``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        w = rng.choice(value_set.array, size=model.grid.n_cells).astype(float)
        v = rng.integers(-1, 2, size=model.grid.n_cells).astype(float)
        if not v.any():
            v[0] = 1.0
        gv = model.inner(model.gradient(w), v)
        fd = (model.objective(w + eps * v) - model.objective(w - eps * v)) / (2 * eps)
        worst = max(worst, abs(gv - fd) / max(1.0, abs(gv)))
    return worst


def write_nodal_csv(path, arr) -> None:
    np.savetxt(path, np.asarray(arr), delimiter=",", fmt="%.17g")
