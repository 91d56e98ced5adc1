"""Integer-valued piecewise-constant controls on a grid.

TV is the anisotropic grid total variation: every interior interface
contributes its measure times the absolute jump. Jumps are summed as
integers per axis and multiplied by the axis measure once, so TV values are
reproducible bit-for-bit regardless of interface ordering.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .exceptions import InvalidArgument
from .grid import Grid, Interface


@dataclass(frozen=True)
class ValueSet:
    """Finite set of admissible integer control values, strictly increasing."""

    values: tuple

    def __post_init__(self):
        vals = tuple(self.values)
        if not vals:
            raise InvalidArgument("value set must be nonempty")
        for v in vals:
            if int(v) != v:
                raise InvalidArgument(f"control values must be integers, got {v}")
        vals = tuple(int(v) for v in vals)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidArgument(f"value set must be strictly increasing, got {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, v):
        return v in self.values

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    @property
    def span(self) -> int:
        return self.values[-1] - self.values[0]

    def closest_to_zero(self) -> int:
        # ties go to the smaller value
        return min(self.values, key=lambda v: (abs(v), v))

    def shifted(self, c: int) -> "ValueSet":
        return ValueSet(tuple(v + c for v in self.values))


class ControlField:
    """Feasible control: one value of ``value_set`` per grid cell.

    The value array is read-only; operations return new fields.
    """

    __slots__ = ("grid", "value_set", "values")

    def __init__(self, grid: Grid, values, value_set: ValueSet, check: bool = True):
        arr = np.array(values, dtype=np.int64).ravel()
        if arr.shape[0] != grid.n_cells:
            raise InvalidArgument(f"expected {grid.n_cells} cell values, got {arr.shape[0]}")
        if check and not np.isin(arr, value_set.array).all():
            bad = np.unique(arr[~np.isin(arr, value_set.array)])
            raise InvalidArgument(f"values {bad.tolist()} not in value set {value_set.values}")
        arr.setflags(write=False)
        self.grid = grid
        self.value_set = value_set
        self.values = arr

    @classmethod
    def constant(cls, grid: Grid, value: int, value_set: ValueSet) -> "ControlField":
        return cls(grid, np.full(grid.n_cells, value), value_set)

    def with_values(self, values) -> "ControlField":
        return ControlField(self.grid, values, self.value_set)

    def as_array(self) -> np.ndarray:
        """Values reshaped to the grid shape."""
        return self.values.reshape(self.grid.shape)

    def __eq__(self, other):
        if not isinstance(other, ControlField):
            return NotImplemented
        return self.grid.same_as(other.grid) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"ControlField(shape={self.grid.shape}, values={self.values.tolist() if self.values.size <= 16 else '...'})"


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, ControlField) else np.asarray(w)


def jump_counts(grid: Grid, values, iface_ids=None) -> np.ndarray:
    """Integer jump sums per axis, optionally restricted to ``iface_ids``."""
    v = np.asarray(values, dtype=np.int64)
    cells = grid.iface_cells
    axis = grid.iface_axis
    if iface_ids is not None:
        cells = cells[iface_ids]
        axis = axis[iface_ids]
    jumps = np.abs(v[cells[:, 0]] - v[cells[:, 1]])
    return np.array([jumps[axis == ax].sum() for ax in range(grid.dim)], dtype=np.int64)


def tv_from_counts(grid: Grid, counts) -> float:
    total = 0.0
    for mu, c in zip(grid.axis_measures, counts):
        total += mu * int(c)
    return total


def tv(field: ControlField, alpha_weight: float | None = None) -> float:
    """Anisotropic total variation, optionally scaled by ``alpha_weight``."""
    val = tv_from_counts(field.grid, jump_counts(field.grid, field.values))
    return val if alpha_weight is None else alpha_weight * val


def _resolve_interfaces(grid: Grid, subset) -> np.ndarray:
    ids = []
    for item in subset:
        if isinstance(item, Interface):
            k = grid.interface_id(item.cell_a, item.cell_b)
        elif isinstance(item, tuple):
            k = grid.interface_id(*item)
        else:
            k = int(item)
            if not 0 <= k < grid.n_interfaces:
                raise InvalidArgument(f"interface id {k} not in grid")
        ids.append(k)
    return np.asarray(ids, dtype=np.int64)


def tv_restricted(field: ControlField, interface_subset: Iterable) -> float:
    """TV summed over a subset of interfaces.

    Entries of ``interface_subset`` may be interface ids, :class:`Interface`
    objects or ``(cell_a, cell_b)`` tuples.
    """
    ids = interface_subset if isinstance(interface_subset, np.ndarray) else _resolve_interfaces(field.grid, interface_subset)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= field.grid.n_interfaces):
        raise InvalidArgument("interface id not in grid")
    return tv_from_counts(field.grid, jump_counts(field.grid, field.values, ids))


def l1_distance(a: ControlField, b: ControlField) -> float:
    if not a.grid.same_as(b.grid):
        raise InvalidArgument("fields live on different grids")
    return a.grid.cell_volume * int(np.abs(a.values - b.values).sum())


def l1_units(a, b) -> int:
    """L1 distance in units of one cell volume (an integer)."""
    return int(np.abs(_values(a) - _values(b)).sum())


def splice(base: ControlField, patch_cells, donor: ControlField) -> ControlField:
    """Field equal to ``donor`` on ``patch_cells`` and to ``base`` elsewhere."""
    if not base.grid.same_as(donor.grid):
        raise InvalidArgument("fields live on different grids")
    out = base.values.copy()
    cells = np.asarray(list(patch_cells) if not isinstance(patch_cells, np.ndarray) else patch_cells, dtype=np.int64)
    out[cells] = donor.values[cells]
    return ControlField(base.grid, out, base.value_set, check=False)


# -- serialization ----------------------------------------------------------
def write_field_csv(path, field: ControlField) -> None:
    """One integer per line in cell order."""
    Path(path).write_text("\n".join(str(int(v)) for v in field.values) + "\n")


def read_field_csv(path, grid: Grid, value_set: ValueSet) -> ControlField:
    text = Path(path).read_text().replace(",", "\n").split()
    return ControlField(grid, [int(t) for t in text], value_set)


def write_pgm(path, field: ControlField) -> None:
    """ASCII PGM (P2) snapshot of a 2D field, values mapped linearly onto 0..255.

    Image rows run from the top of the domain (largest second coordinate)
    downwards, columns along the first coordinate.
    """
    if field.grid.dim != 2:
        raise InvalidArgument("PGM export needs a 2D field")
    lo, hi = field.value_set.values[0], field.value_set.values[-1]
    arr = field.as_array().astype(float)
    scaled = np.zeros_like(arr) if hi == lo else (arr - lo) * 255.0 / (hi - lo)
    img = np.rint(scaled).astype(int).T[::-1]
    lines = ["P2", f"{img.shape[1]} {img.shape[0]}", "255"]
    lines += [" ".join(str(p) for p in row) for row in img]
    Path(path).write_text("\n".join(lines) + "\n")
