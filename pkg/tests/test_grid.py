import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sktsim.grid import (
    BoundaryCondition,
    FieldPair,
    Grid,
    gradient_sq,
    inner,
    laplacian,
    laplacian_matrix,
    lp_norm,
    norms,
    read_field,
    spacetime_norm,
    weak_norm,
    write_field,
)

NEU = BoundaryCondition.NEUMANN
DIR = BoundaryCondition.DIRICHLET


def u_field(grid, values):
    return FieldPair(grid, values, np.zeros(grid.shape))


def random_pair(grid, seed):
    rng = np.random.default_rng(seed)
    return FieldPair(grid, rng.standard_normal(grid.shape), rng.standard_normal(grid.shape))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(3, 1.0, 8)
    with pytest.raises(ValueError):
        Grid(1, -1.0, 8)
    with pytest.raises(ValueError):
        Grid(1, 1.0, 2)
    g = Grid(2, 2.0, 10)
    assert g.h == 0.2 and g.node_count == 100


def test_laplacian_constant_neumann_is_zero():
    grid = Grid(1, 1.0, 32)
    f = FieldPair.constant(grid, 3.0, -1.5)
    lap = laplacian(f, NEU)
    assert np.all(lap.u == 0.0) and np.all(lap.v == 0.0)


def test_laplacian_exact_on_quadratics_interior():
    grid = Grid(1, 1.0, 16)
    x = grid.centers()
    lap = laplacian(u_field(grid, x**2), NEU)
    assert np.allclose(lap.u[1:-1], 2.0, atol=1e-10)


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_second_order_convergence(dim):
    errors = []
    for n in (32, 64, 128):
        grid = Grid(dim, 1.0, n)
        if dim == 1:
            x = grid.centers()
            vals, exact = np.cos(np.pi * x), -np.pi**2 * np.cos(np.pi * x)
        else:
            X, Y = grid.meshgrid()
            vals = np.cos(np.pi * X) * np.cos(np.pi * Y)
            exact = -2.0 * np.pi**2 * vals
        lap = laplacian(u_field(grid, vals), NEU)
        errors.append(np.max(np.abs(lap.u - exact)))
    for e_coarse, e_fine in zip(errors, errors[1:]):
        assert 3.0 < e_coarse / e_fine < 5.0


def test_gradient_sq_constant_and_linear():
    grid = Grid(1, 1.0, 32)
    assert np.all(gradient_sq(FieldPair.constant(grid, 4.0, 4.0), NEU) == 0.0)
    a = 2.5
    gsq = gradient_sq(u_field(grid, a * grid.centers()), NEU)
    assert np.allclose(gsq[1:-1], a**2, atol=1e-12)


def test_gradient_sq_convergence_dirichlet():
    # sin(pi x) is odd across both walls, so Dirichlet ghosts are exact.
    errors = []
    for n in (32, 64, 128):
        grid = Grid(1, 1.0, n)
        x = grid.centers()
        gsq = gradient_sq(u_field(grid, np.sin(np.pi * x)), DIR)
        exact = (np.pi * np.cos(np.pi * x)) ** 2
        errors.append(np.max(np.abs(gsq - exact)))
    for e_coarse, e_fine in zip(errors, errors[1:]):
        assert 3.0 < e_coarse / e_fine < 5.0


def test_norms_constant_field():
    grid = Grid(1, 1.0, 32)
    rep = norms(u_field(grid, np.ones(grid.shape)), NEU)
    assert rep.l2 == pytest.approx(1.0, abs=1e-13)
    assert rep.h1 == pytest.approx(1.0, abs=1e-13)
    assert rep.weak == pytest.approx(1.0, rel=1e-10)
    assert rep.l4 == pytest.approx(1.0, abs=1e-13)
    assert rep.linf == 1.0


def test_norms_zero_field():
    grid = Grid(2, 1.0, 8)
    rep = norms(FieldPair.zeros(grid), NEU)
    assert rep.l2 == rep.h1 == rep.l4 == rep.linf == rep.weak == 0.0


def test_norms_sine_l2_analytic():
    # Midpoint sums of sin^2 over whole periods are exact, so the analytic
    # value 1/2 is hit at every resolution.
    for n in (32, 64, 128):
        grid = Grid(1, 1.0, n)
        rep = norms(u_field(grid, np.sin(np.pi * grid.centers())), DIR)
        assert rep.l2**2 == pytest.approx(0.5, abs=1e-13)


def test_quadrature_second_order_on_smooth_data():
    exact = (math.exp(2.0) - 1.0) / 2.0  # integral of exp(2x) on (0,1)
    errs = []
    for n in (32, 64, 128):
        grid = Grid(1, 1.0, n)
        rep = norms(u_field(grid, np.exp(grid.centers())), NEU)
        errs.append(abs(rep.l2**2 - exact))
    for e_coarse, e_fine in zip(errs, errs[1:]):
        assert 3.0 < e_coarse / e_fine < 5.0


def test_norms_h1_dominates_l2():
    grid = Grid(1, 1.0, 24)
    for seed in range(5):
        rep = norms(random_pair(grid, seed), NEU)
        assert rep.h1 >= rep.l2


def test_weak_norm_bounded_by_l2():
    for dim, n in ((1, 64), (2, 16)):
        grid = Grid(dim, 1.0, n)
        for seed in range(8):
            f = random_pair(grid, seed)
            for bc in (NEU, DIR):
                assert weak_norm(f, bc) <= norms(f, bc).l2 * (1 + 1e-8)


@pytest.mark.parametrize("dim,n", [(1, 128), (2, 12)])
@pytest.mark.parametrize("bc", [NEU, DIR])
def test_laplacian_self_adjoint(dim, n, bc):
    grid = Grid(dim, 1.0, n)
    f, g = random_pair(grid, 1), random_pair(grid, 2)
    lf, lg = laplacian(f, bc), laplacian(g, bc)
    lhs, rhs = inner(lf, g), inner(f, lg)
    scale = norms(lf, bc).l2 * norms(g, bc).l2 + norms(f, bc).l2 * norms(lg, bc).l2
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1.0)


def test_laplacian_matrix_matches_stencil():
    for dim, n, bc in ((1, 16, NEU), (1, 16, DIR), (2, 8, NEU), (2, 8, DIR)):
        grid = Grid(dim, 1.0, n)
        f = random_pair(grid, dim * 10 + n)
        direct = laplacian(f, bc).u.ravel()
        via_matrix = laplacian_matrix(grid, bc) @ f.u.ravel()
        assert np.allclose(direct, via_matrix, rtol=1e-13, atol=1e-10)


def test_divergence_theorem_neumann():
    grid = Grid(1, 1.0, 64)
    ones = FieldPair.constant(grid, 1.0, 1.0)
    for seed in range(5):
        f = random_pair(grid, seed + 20)
        lap = laplacian(f, NEU)
        scale = max(norms(lap, NEU).l2, 1.0)
        assert abs(inner(lap, ones)) <= 1e-12 * scale


def test_inner_examples_and_bilinearity():
    grid = Grid(1, 1.0, 17)
    ones = FieldPair.constant(grid, 1.0, 1.0)
    assert inner(ones, ones) == pytest.approx(2.0, abs=1e-13)

    f = random_pair(grid, 3)
    rotated = FieldPair(grid, -f.v, f.u)
    assert inner(f, rotated) == pytest.approx(0.0, abs=1e-13)

    g = random_pair(grid, 4)
    assert abs(inner(2.0 * f, g) - 2.0 * inner(f, g)) <= 1e-14 * max(abs(inner(f, g)), 1.0)


@settings(max_examples=50)
@given(st.floats(min_value=-4, max_value=4), st.floats(min_value=-4, max_value=4))
def test_inner_linear_in_first_argument(a, b):
    grid = Grid(1, 1.0, 8)
    f, g, w = random_pair(grid, 5), random_pair(grid, 6), random_pair(grid, 7)
    combo = a * f + b * g
    expected = a * inner(f, w) + b * inner(g, w)
    assert inner(combo, w) == pytest.approx(expected, abs=1e-12)


def test_spacetime_norm_examples():
    grid = Grid(1, 1.0, 16)
    times = np.linspace(0.0, 1.0, 11)
    zeros = [FieldPair.zeros(grid) for _ in times]
    assert spacetime_norm(times, zeros, 2.0) == 0.0

    ones = [u_field(grid, np.ones(grid.shape)) for _ in times]
    assert spacetime_norm(times, ones, 2.0) == pytest.approx(1.0, abs=1e-12)

    c = 3.0
    consts = [u_field(grid, np.full(grid.shape, c)) for _ in times]
    assert spacetime_norm(times, consts, 4.0 / 3.0) == pytest.approx(c, rel=1e-12)


def test_field_snapshot_roundtrip_bit_exact(tmp_path):
    for dim, n in ((1, 33), (2, 9)):
        grid = Grid(dim, 1.0, n)
        f = random_pair(grid, 100 + dim)
        path = tmp_path / f"snap{dim}.field"
        write_field(path, f)
        g = read_field(path)
        assert np.array_equal(f.u, g.u) and np.array_equal(f.v, g.v)
        assert g.grid.dim == dim and g.grid.n == n and g.grid.h == grid.h


def test_read_field_rejects_malformed(tmp_path):
    path = tmp_path / "bad.field"
    path.write_text("not a snapshot\n1 2 3\n")
    with pytest.raises(ValueError):
        read_field(path)


def test_lp_norm_matches_manual():
    grid = Grid(1, 1.0, 16)
    f = random_pair(grid, 9)
    manual = (grid.h * (np.sum(np.abs(f.u) ** 3) + np.sum(np.abs(f.v) ** 3))) ** (1 / 3)
    assert lp_norm(f, 3.0) == pytest.approx(manual, rel=1e-13)
