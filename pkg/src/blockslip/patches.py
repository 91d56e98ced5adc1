"""Overlapping box patches covering the grid.

A cell belongs to a patch when its center lies in the patch's closed box.
Box coordinates and cell centers are compared in exact rational arithmetic.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

from .exceptions import CoverError, InvalidArgument
from .grid import Grid, exact

_log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Patch:
    id: int
    lower: tuple
    upper: tuple
    cells: np.ndarray
    interior_interfaces: np.ndarray
    boundary_interfaces: np.ndarray

    @property
    def touching_interfaces(self) -> np.ndarray:
        return np.concatenate([self.interior_interfaces, self.boundary_interfaces])

    @property
    def size(self) -> int:
        return int(self.cells.size)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "box": {"lower": list(self.lower), "upper": list(self.upper)},
            "cells": self.cells.tolist(),
        }


def patch_from_cells(grid: Grid, cells, pid: int = 0, lower=None, upper=None) -> Patch:
    """Patch from an explicit cell set; the box defaults to the cells' hull."""
    cells = np.unique(np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells, dtype=np.int64))
    if cells.size and (cells[0] < 0 or cells[-1] >= grid.n_cells):
        raise InvalidArgument("patch cell index outside grid")
    mask = np.zeros(grid.n_cells, dtype=bool)
    mask[cells] = True
    ia = mask[grid.iface_cells[:, 0]]
    ib = mask[grid.iface_cells[:, 1]]
    interior = np.flatnonzero(ia & ib)
    boundary = np.flatnonzero(ia ^ ib)
    if lower is None:
        if cells.size:
            multi = np.array(np.unravel_index(cells, grid.shape)).T
            lower = tuple(lo + h * int(m) for lo, h, m in zip(grid.lower, grid.spacing, multi.min(axis=0)))
            upper = tuple(lo + h * (int(m) + 1) for lo, h, m in zip(grid.lower, grid.spacing, multi.max(axis=0)))
        else:
            lower = upper = tuple(grid.lower)
    for arr in (cells, interior, boundary):
        arr.setflags(write=False)
    return Patch(pid, tuple(lower), tuple(upper), cells, interior, boundary)


@dataclass(frozen=True, eq=False)
class PatchSet:
    grid: Grid
    patches: tuple
    overlap: tuple = field(default=())

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, i) -> Patch:
        return self.patches[i]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "overlap": list(self.overlap),
            "patches": [p.to_dict() for p in self.patches],
        }

    def dump_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


@dataclass
class CoverReport:
    uncovered: list
    split: list

    @property
    def ok(self) -> bool:
        return not self.uncovered and not self.split

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.uncovered:
            parts.append(f"{len(self.uncovered)} uncovered cells (first: {self.uncovered[:5]})")
        if self.split:
            parts.append(f"{len(self.split)} cells whose neighborhood lies in no single patch (first: {self.split[:5]})")
        return "; ".join(parts)


def axis_breakpoints(lo: float, hi: float, n: int, overlap: float) -> list:
    """Exact ``(start, end)`` per patch along one axis.

    Patches have equal length ``(L + (n - 1) * overlap) / n`` and neighbors
    share an interval of length ``overlap``.
    """
    lo_q, hi_q = exact(lo), exact(hi)
    if n == 1:
        return [(lo_q, hi_q)]
    length = hi_q - lo_q
    v = exact(overlap)
    if v < 0:
        raise InvalidArgument("overlap must be nonnegative")
    if v > length:
        raise InvalidArgument(f"overlap {overlap} exceeds domain extent {float(length)}")
    size = (length + (n - 1) * v) / n
    stride = size - v
    out = [(lo_q + i * stride, lo_q + i * stride + size) for i in range(n)]
    out[-1] = (out[-1][0], hi_q)
    return out


def make_uniform_patches(grid: Grid, n_patches_per_axis, overlap_per_axis, strict: bool = True) -> PatchSet:
    """Uniform tensor layout of ``prod(n_patches_per_axis)`` overlapping boxes.

    Patches are ordered row-major over their per-axis position, matching the
    cell ordering.  With ``strict`` (default) a layout that fails
    :func:`validate_cover` raises :class:`CoverError`; otherwise a warning is
    logged.
    """
    if np.ndim(n_patches_per_axis) == 0:
        n_patches_per_axis = [n_patches_per_axis] * grid.dim
    if np.ndim(overlap_per_axis) == 0:
        overlap_per_axis = [overlap_per_axis] * grid.dim
    if len(n_patches_per_axis) != grid.dim or len(overlap_per_axis) != grid.dim:
        raise InvalidArgument("need one patch count and one overlap per axis")
    for n in n_patches_per_axis:
        if int(n) != n or n < 1:
            raise InvalidArgument(f"patch count must be a positive integer, got {n}")

    per_axis_boxes = []
    per_axis_members = []
    for ax in range(grid.dim):
        bps = axis_breakpoints(grid.lower[ax], grid.upper[ax], int(n_patches_per_axis[ax]), overlap_per_axis[ax])
        lo_q = exact(grid.lower[ax])
        h_q = grid.spacing_exact[ax]
        centers = [lo_q + (i + Fraction(1, 2)) * h_q for i in range(grid.shape[ax])]
        members = [np.array([i for i, c in enumerate(centers) if a <= c <= b], dtype=np.int64) for a, b in bps]
        per_axis_boxes.append(bps)
        per_axis_members.append(members)

    patches = []
    for pid, pos in enumerate(product(*[range(len(b)) for b in per_axis_boxes])):
        idx = [per_axis_members[ax][p] for ax, p in enumerate(pos)]
        if any(i.size == 0 for i in idx):
            raise InvalidArgument(f"patch {pid} contains no cell centers; use fewer patches or a finer grid")
        mesh = np.meshgrid(*idx, indexing="ij")
        cells = np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape)
        lower = tuple(float(per_axis_boxes[ax][p][0]) for ax, p in enumerate(pos))
        upper = tuple(float(per_axis_boxes[ax][p][1]) for ax, p in enumerate(pos))
        patches.append(patch_from_cells(grid, np.sort(cells), pid, lower, upper))

    pset = PatchSet(grid, tuple(patches), tuple(float(v) for v in overlap_per_axis))
    report = validate_cover(pset, grid)
    if not report.ok:
        if strict:
            raise CoverError(f"patch layout violates the cover requirements: {report.summary()}")
        _log.warning("patch layout violates the cover requirements: %s", report.summary())
    return pset


def whole_domain(grid: Grid) -> PatchSet:
    return PatchSet(grid, (patch_from_cells(grid, np.arange(grid.n_cells), 0, grid.lower, grid.upper),), (0.0,) * grid.dim)


def validate_cover(patchset: PatchSet, grid: Grid) -> CoverReport:
    """Check that every cell is covered and that every cell together with
    all of its neighbors lies inside at least one single patch."""
    n = grid.n_cells
    member = np.zeros((len(patchset.patches), n), dtype=bool)
    for k, p in enumerate(patchset.patches):
        member[k, p.cells] = True
    covered = member.any(axis=0)
    # cell c is "strongly" covered by patch k if c and all neighbors are in k
    strong = member.copy()
    a, b = grid.iface_cells[:, 0], grid.iface_cells[:, 1]
    for k in range(member.shape[0]):
        mk = member[k]
        bad = np.zeros(n, dtype=bool)
        bad[a[~mk[b]]] = True
        bad[b[~mk[a]]] = True
        strong[k] &= ~bad
    split = covered & ~strong.any(axis=0)
    return CoverReport(np.flatnonzero(~covered).tolist(), np.flatnonzero(split).tolist())
