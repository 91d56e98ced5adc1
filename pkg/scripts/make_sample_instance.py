"""Regenerate the shipped sample subproblem and its brute-force solution."""
from pathlib import Path
import json

import numpy as np

from blockslip.control import ControlField, ValueSet
from blockslip.grid import build_grid
from blockslip.patches import patch_from_cells
from blockslip.trsub import TrustRegionSubproblem, save_subproblem, solve_bruteforce, step_to_dict

DATA = Path(__file__).resolve().parents[1] / "src" / "blockslip" / "data"


def main():
    rng = np.random.default_rng(20240611)
    grid = build_grid(2, (0.0, 1.0), 5)
    vs = ValueSet((0, 1, 2))
    base = ControlField(grid, rng.integers(0, 3, grid.n_cells), vs)
    grad = rng.uniform(-1.0, 1.0, grid.n_cells)
    cells = [grid.cell_index((i, j)) for i in range(1, 4) for j in range(1, 4)]
    sub = TrustRegionSubproblem(base, grad, patch_from_cells(grid, cells), 0.2, 0.05)
    save_subproblem(DATA / "sample_instance.json", sub)
    step = step_to_dict(solve_bruteforce(sub))
    (DATA / "sample_instance.expected.json").write_text(json.dumps({"trial": step["trial"], "pred": step["pred"]}) + "\n")


if __name__ == "__main__":
    main()
