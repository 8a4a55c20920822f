import math

import pytest

import damprank as dr


def test_cycle_rank_closed_form():
    g = dr.cycle_graph(3)
    assert g.n == 3 and g.edge_count == 3
    b = dr.build_basis(g, pv=[1.0, 0.0, 0.0], dangling="error")
    assert b.happy and b.m == 3
    x = dr.rank(b, "geometric", 0.5)
    for got, want in zip(x, (4 / 7, 2 / 7, 1 / 7)):
        assert got == pytest.approx(want, abs=1e-11)


def test_basis_and_iterative_paths_agree():
    g = dr.random_graph(200, seed=11)
    b = dr.build_basis(g, pv=4)
    x = dr.rank(b, "geometric", 0.85)
    y = dr.gauss_seidel_rank(g, 0.85, pv=4)
    assert max(abs(a - c) for a, c in zip(x, y)) < 1e-10
    assert sum(x) == pytest.approx(1.0, abs=1e-10)


def test_rank_derivative_conserves_mass():
    g = dr.random_graph(150, seed=2)
    b = dr.build_basis(g, pv=9)
    xd = dr.rank_derivative(b, "poisson", 4.0)
    assert sum(xd) == pytest.approx(0.0, abs=1e-10)


def test_basis_round_trip(tmp_path):
    g = dr.random_graph(60, seed=5)
    b = dr.build_basis(g, pv=1)
    path = str(tmp_path / "g.basis")
    b.save(path)
    b2 = dr.load_basis(path)
    assert b2.m == b.m and b2.sigma == b.sigma
    assert dr.rank(b2, "logarithmic", 0.7) == dr.rank(b, "logarithmic", 0.7)


def test_kernel_helpers():
    assert dr.weight("geometric", 0, 0.85) == pytest.approx(0.15)
    assert dr.tail_mass("geometric", 0, 0.85) == pytest.approx(0.85)
    assert dr.mean_steps("poisson", 3.5) == pytest.approx(3.5)
    assert dr.correspondence_solve("poisson", 19.0) == 19.0
    gamma = dr.correspondence_solve("logarithmic", 17 / 3)
    assert gamma == pytest.approx(0.94146, abs=5e-5)
    # the nu=1 limit of the cmp family is the poisson family
    for k in range(20):
        assert dr.weight("cmp", k, 3.0, nu=1.0) == pytest.approx(
            dr.weight("poisson", k, 3.0), abs=1e-12
        )


def test_divergence_and_components():
    assert dr.kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert dr.kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(
        0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    )
    g = dr.cycle_graph(4)
    assert dr.scc_block_sizes(g) == [4]


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        dr.weight("geometric", 0, 1.5)
    with pytest.raises(ValueError):
        dr.build_basis(dr.cycle_graph(3), pv=[1.0, 0.0])
    with pytest.raises(ValueError):
        dr.rank(dr.build_basis(dr.cycle_graph(3)), "nosuch", 0.5)
