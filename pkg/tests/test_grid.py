from fractions import Fraction

import numpy as np
import pytest

from blockslip.exceptions import InvalidArgument
from blockslip.grid import build_grid, grid_from_dict


def test_1d_geometry():
    g = build_grid(1, (-1.0, 1.0), 4)
    assert g.n_cells == 4
    assert g.cell_volume_exact == Fraction(1, 2)
    np.testing.assert_allclose(g.centers[:, 0], [-0.75, -0.25, 0.25, 0.75])
    assert g.n_interfaces == 3
    assert g.axis_measures == (1.0,)


def test_2d_interface_count_and_measure():
    g = build_grid(2, (0.0, 1.0), 4)
    assert g.n_cells == 16
    assert g.n_interfaces == 2 * 4 * 3
    assert g.cell_volume == pytest.approx(1 / 16)
    assert set(g.iface_measure.tolist()) == {0.25}


def test_anisotropic_measures():
    # a vertical interface (normal along x) has the length of the cell in y
    g = build_grid(2, [(0.0, 1.0), (0.0, 1.0)], [2, 4])
    assert g.axis_measures == (0.25, 0.5)


def test_row_major_ordering():
    g = build_grid(2, (0.0, 1.0), (3, 2))
    assert g.cell_index((1, 0)) == 2
    assert g.multi_index(5) == (2, 1)
    c = g.centers
    np.testing.assert_allclose(c[2], [0.5, 0.25])


def test_neighbors_sorted_and_symmetric(grid2d):
    for c in range(grid2d.n_cells):
        nb = grid2d.neighbors(c)
        assert nb == sorted(nb)
        for d in nb:
            assert c in grid2d.neighbors(d)
            grid2d.interface_id(c, d)
    assert grid2d.neighbors(0) == [1, 4]
    assert len(grid2d.neighbors(5)) == 4


def test_interfaces_lexicographic(grid2d):
    pairs = [tuple(p) for p in grid2d.iface_cells.tolist()]
    assert pairs == sorted(pairs)
    assert all(a < b for a, b in pairs)
    assert len(grid2d.interfaces) == grid2d.n_interfaces


def test_interface_id_rejects_non_neighbors(grid2d):
    with pytest.raises(InvalidArgument):
        grid2d.interface_id(0, 5)


@pytest.mark.parametrize("args", [(3, (0, 1), 4), (1, (1, 0), 4), (1, (0, 1), 0), (2, (0, 1), 2.5)])
def test_invalid_grids(args):
    with pytest.raises(InvalidArgument):
        build_grid(*args)


def test_roundtrip_dict(grid2d):
    g = grid_from_dict(grid2d.to_dict())
    assert g.same_as(grid2d)
