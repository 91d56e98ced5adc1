"""Desk-scale benchmark sweeps over regularization weight and patch count."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .control import ControlField, ValueSet
from .exceptions import InvalidArgument
from .grid import build_grid
from .models import ConvectionDiffusionModel, ConvolutionModel
from .patches import make_uniform_patches
from .slip import RunResult, SlipConfig, run

SUMMARY_HEADER = ("n_cells", "n_patches", "alpha", "J", "F", "TV", "n_subproblems", "wall_s", "reason")

ONED_ALPHAS = (1.25e-4, 5e-4, 2e-3)
TWOD_ALPHAS = (5e-4, 7.5e-4, 1e-3, 1.25e-3, 1.5e-3, 1.75e-3, 2e-3, 2.25e-3)
PATCH_COUNTS = (1, 4, 9)
DEFAULT_N = {"oned": 256, "twod": 16}


@dataclass
class BenchRow:
    n_cells: int
    n_patches: int
    alpha: float
    result: RunResult

    def as_tuple(self) -> tuple:
        r = self.result
        return (self.n_cells, self.n_patches, self.alpha, r.J, r.F, r.TV, r.n_subproblems, r.wall_s, r.reason)


def summary_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SUMMARY_HEADER)
    for row in rows:
        wr.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def patches_per_axis(n_patches: int, dim: int) -> int:
    if dim == 1:
        return n_patches
    side = round(n_patches ** 0.5)
    if side * side != n_patches:
        raise InvalidArgument(f"{n_patches} patches do not form a square layout")
    return side


def suite_setup(suite: str, n: int | None = None):
    """Grid, model, value set, default overlap and outer iteration cap."""
    if suite not in DEFAULT_N:
        raise InvalidArgument(f"unknown suite {suite!r}; choose 'oned' or 'twod'")
    n = n or DEFAULT_N[suite]
    if suite == "oned":
        grid = build_grid(1, (-1.0, 1.0), n)
        vs = ValueSet((-1, 0, 1))
        model = ConvolutionModel(grid)
        overlap = max(0.2, 2 * grid.spacing[0])
        iters = 1000
    else:
        grid = build_grid(2, (0.0, 1.0), n)
        vs = ValueSet((0, 1))
        model = ConvectionDiffusionModel(grid, value_set=vs)
        # coarse grids need the overlap to span at least two cells
        overlap = max(0.1, 2 * grid.spacing[0])
        iters = 100
    return grid, model, vs, overlap, iters


def run_suite(suite: str, n: int | None = None, alphas=None, patch_counts=PATCH_COUNTS, workers: int = 1,
              on_row=None) -> list:
    grid, model, vs, overlap, iters = suite_setup(suite, n)
    alphas = alphas if alphas is not None else (ONED_ALPHAS if suite == "oned" else TWOD_ALPHAS)
    lipschitz = model.lipschitz_bound(vs)
    cfg = SlipConfig(max_outer_iters=iters, lipschitz=lipschitz, workers=workers)
    w0 = ControlField.constant(grid, vs.closest_to_zero(), vs)
    rows = []
    for n_p in patch_counts:
        patches = make_uniform_patches(grid, patches_per_axis(n_p, grid.dim), overlap)
        for alpha in alphas:
            res = run(model, patches, alpha, vs, cfg, w0)
            row = BenchRow(grid.n_cells, len(patches), alpha, res)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows
