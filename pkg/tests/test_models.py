import numpy as np
import pytest

from blockslip.control import ControlField, ValueSet
from blockslip.exceptions import InvalidArgument
from blockslip.grid import build_grid
from blockslip.models import (
    ConvectionDiffusionModel,
    ConvolutionModel,
    QuadraticModel,
    gradient_check,
    target_control,
)

from _oracles import conv1d_objective_constant_one, dense_objective, dense_state, dense_target_state


@pytest.fixture(scope="module")
def pde8():
    return ConvectionDiffusionModel(build_grid(2, (0.0, 1.0), 8), value_set=ValueSet((0, 1)))


def test_quadratic_exact():
    g = build_grid(1, (0.0, 1.0), 4)
    m = QuadraticModel(g, [0.5, 0.5, 1.0, 0.0])
    w = np.array([1, 0, 1, 1])
    assert m.objective(w) == pytest.approx(0.5 * 0.25 * (0.25 + 0.25 + 0 + 1))
    np.testing.assert_allclose(m.gradient(w), [0.5, -0.5, 0.0, 1.0])
    assert gradient_check(m, ValueSet((0, 1))) < 1e-12


def test_quadratic_lipschitz():
    g = build_grid(2, (0.0, 1.0), 4)
    m = QuadraticModel(g, 0.3)
    L = m.lipschitz_bound()
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.integers(0, 3, (2, 16))
        lhs = np.abs(m.gradient(a) - m.gradient(b)).max()
        assert lhs <= L * g.cell_volume * np.abs(a - b).sum() + 1e-12


def test_conv1d_constant_control_matches_series():
    g = build_grid(1, (-1.0, 1.0), 16)
    m = ConvolutionModel(g)
    assert m.objective(np.ones(16)) == pytest.approx(conv1d_objective_constant_one(16), rel=1e-13)


def test_conv1d_operator_is_strictly_causal():
    m = ConvolutionModel(build_grid(1, (-1.0, 1.0), 8))
    assert np.all(np.triu(m.A) == 0)
    assert np.all(m.A[np.tril_indices(8, -1)] > 0)


def test_conv1d_gradient_check():
    m = ConvolutionModel(build_grid(1, (-1.0, 1.0), 64))
    assert gradient_check(m, ValueSet((-1, 0, 1)), n_samples=10) <= 1e-6


def test_conv1d_lipschitz_random_pairs():
    g = build_grid(1, (-1.0, 1.0), 64)
    m = ConvolutionModel(g)
    L = m.lipschitz_bound()
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b = rng.integers(-1, 2, (2, 64))
        lhs = np.abs(m.gradient(a) - m.gradient(b)).max()
        assert lhs <= L * g.cell_volume * np.abs(a - b).sum() + 1e-14


def test_conv1d_rejects_2d():
    with pytest.raises(InvalidArgument):
        ConvolutionModel(build_grid(2, (0.0, 1.0), 4))


def test_target_control_values():
    assert target_control(0.1, 0.1) == pytest.approx(2.5625)
    assert target_control(0.5, 0.5) == pytest.approx(-0.02025)


def test_pde_state_matches_dense_reference(pde8):
    rng = np.random.default_rng(3)
    for _ in range(3):
        w = rng.integers(0, 2, 64)
        assert np.abs(pde8.state(w) - dense_state(8, w)).max() <= 1e-8


def test_pde_target_and_objective_match_dense_reference(pde8):
    assert np.abs(pde8.target_state() - dense_target_state(8)).max() <= 1e-8
    w = np.zeros(64, dtype=int)
    w[::3] = 1
    assert pde8.objective(w) == pytest.approx(dense_objective(8, w), rel=1e-10)


def test_pde_boundary_data(pde8):
    u = pde8.state(np.ones(64))
    x = np.arange(9) / 8
    assert np.all(u[0, :] == 0) and np.all(u[-1, :] == 0)
    expect = np.where((x > 0.25) & (x < 0.75), np.sin(2 * np.pi * (x - 0.25)), 0.0)
    np.testing.assert_allclose(u[:, 0], expect)


def test_pde_minimum_principle(pde8):
    # nonnegative source, boundary data and reaction give a nonnegative state
    rng = np.random.default_rng(4)
    for _ in range(10):
        assert pde8.state(rng.integers(0, 2, 64)).min() >= -1e-12


def test_pde_gradient_check(pde8):
    assert gradient_check(pde8, ValueSet((0, 1)), n_samples=10) <= 1e-6


def test_pde_gradient_sign():
    # more reaction lowers the state; where the state overshoots the target
    # the gradient with respect to the control must be negative
    m = ConvectionDiffusionModel(build_grid(2, (0.0, 1.0), 8))
    w = np.zeros(64)
    g = m.gradient(w)
    eps = 1e-6
    for c in (0, 27, 63):
        e = np.zeros(64)
        e[c] = 1.0
        fd = (m.objective(w + eps * e) - m.objective(w - eps * e)) / (2 * eps)
        assert np.sign(fd) == np.sign(g[c])


def test_pde_lipschitz_bound_positive(pde8):
    assert pde8.lipschitz_bound() > 0


def test_pde_cache_does_not_change_results(pde8):
    rng = np.random.default_rng(5)
    ws = [rng.integers(0, 2, 64) for _ in range(6)]
    first = [pde8.objective(w) for w in ws]
    again = [pde8.objective(w) for w in reversed(ws)][::-1]
    assert first == again


def test_pde_accepts_control_fields(pde8):
    vs = ValueSet((0, 1))
    w = ControlField.constant(pde8.grid, 1, vs)
    assert pde8.objective(w) == pde8.objective(np.ones(64))


def test_pde_domain_check():
    with pytest.raises(InvalidArgument):
        ConvectionDiffusionModel(build_grid(2, (0.0, 2.0), 4))
