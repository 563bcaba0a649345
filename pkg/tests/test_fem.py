from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as sla

from hpstab.errors import CoefficientError, EmptyDomain, StateError
from hpstab.fem import (AmbientSystem, CoefficientField, assemble, dual_norms, export_coo,
                        export_field_csv, friedrichs_constant, functional_dual_norm, norms,
                        restrict, solve_dirichlet)
from hpstab.geometry import GridGeometry, RasterSet, Rectangle, rasterize

from oracles import q1_eigenvalue_1d, square_poisson_max

ONE = lambda x, y: np.ones_like(x)  # noqa: E731


@pytest.fixture(scope="module")
def unit_box_128():
    return assemble(GridGeometry(128, 1.0), CoefficientField.identity())


# --- assembly ------------------------------------------------------------

def test_single_interior_node_entries():
    amb = assemble(GridGeometry(2, 1.0), CoefficientField.identity())
    assert amb.ndof == 1
    assert amb.K[0, 0] == pytest.approx(8 / 3, rel=1e-14)
    assert amb.M[0, 0] == pytest.approx(1 / 9, rel=1e-14)


def test_doubling_coefficient_doubles_stiffness():
    grid = GridGeometry(8, 1.0)
    a = assemble(grid, CoefficientField.identity())
    b = assemble(grid, CoefficientField.from_matrix(2 * np.eye(2)))
    assert abs(b.K - 2 * a.K).max() == pytest.approx(0.0, abs=1e-13)
    assert abs(b.M - a.M).max() == 0.0


def test_nonsymmetric_coefficient_rejected():
    with pytest.raises(CoefficientError):
        assemble(GridGeometry(4, 1.0), CoefficientField.from_matrix([[1.0, 0.5], [0.0, 1.0]], 0.5))


def test_ellipticity_violation_rejected():
    with pytest.raises(CoefficientError):
        assemble(GridGeometry(4, 1.0), CoefficientField.from_matrix(np.eye(2), 2.0))


def test_variable_coefficient_lipschitz_checked():
    func = lambda x, y: (1 + x)[..., None, None] * np.eye(2)  # noqa: E731
    grid = GridGeometry(16, 1.0)
    ok = CoefficientField(func, 1.0, lipschitz=1.0)
    lo, hi = ok.validate(grid)
    assert 1.0 <= lo <= hi <= 2.0
    with pytest.raises(CoefficientError):
        CoefficientField(func, 1.0, lipschitz=0.5).validate(grid)


def test_variable_coefficient_between_constant_bounds():
    func = lambda x, y: (1 + x)[..., None, None] * np.eye(2)  # noqa: E731
    grid = GridGeometry(16, 1.0)
    amb = assemble(grid, CoefficientField(func, 1.0, lipschitz=1.0))
    lo = assemble(grid, CoefficientField.identity())
    hi = assemble(grid, CoefficientField.from_matrix(2 * np.eye(2)))
    u = np.random.default_rng(0).standard_normal(amb.ndof)
    assert u @ (lo.K @ u) <= u @ (amb.K @ u) <= u @ (hi.K @ u)


def test_midpoint_and_gauss_agree_for_constant_coefficient():
    grid = GridGeometry(8, 1.0)
    coeff = CoefficientField.diagonal(1.0, 4.0)
    a = assemble(grid, coeff, quadrature="gauss")
    b = assemble(grid, coeff, quadrature="midpoint")
    assert abs(a.K - b.K).max() < 1e-13


def test_coefficient_from_config():
    c = CoefficientField.from_config({"kind": "diagonal", "a11": 1.0, "a22": 4.0})
    assert np.allclose(c(np.array(0.3), np.array(0.4)), np.diag([1.0, 4.0]))
    with pytest.raises(CoefficientError):
        CoefficientField.from_config({"kind": "quadratic"})


# --- Friedrichs constant -------------------------------------------------

def test_friedrichs_constant_unit_box(unit_box_128):
    exact_discrete = 1 / (2 * q1_eigenvalue_1d(1, 128))
    assert unit_box_128.p == pytest.approx(exact_discrete, rel=1e-9)
    assert unit_box_128.p == pytest.approx(1 / (2 * math.pi ** 2), rel=0.005)


def test_friedrichs_constant_scales_with_coefficient():
    grid = GridGeometry(16, 1.0)
    p1 = friedrichs_constant(grid)
    p4 = friedrichs_constant(grid, CoefficientField.from_matrix(4 * np.eye(2)))
    assert p4 == pytest.approx(p1 / 4, rel=1e-12)


def test_friedrichs_constant_side_two():
    p = friedrichs_constant(GridGeometry(64, 2.0, -1.0, -1.0))
    assert p == pytest.approx(1 / (2 * q1_eigenvalue_1d(1, 64, 2.0)), rel=1e-9)
    assert p == pytest.approx(2 / math.pi ** 2, rel=0.005)


def test_missing_friedrichs_constant_is_a_state_error():
    amb = assemble(GridGeometry(4, 1.0), CoefficientField.identity(), compute_p=False)
    with pytest.raises(StateError):
        amb.p


# --- restriction ---------------------------------------------------------

def test_full_box_keeps_every_dof():
    grid = GridGeometry(8, 1.0)
    amb = assemble(grid, CoefficientField.identity())
    sys_ = restrict(amb, RasterSet.full(grid))
    assert sys_.ndof == amb.ndof
    assert abs(sys_.K - amb.K).max() == 0.0


def test_restriction_to_centre_square():
    grid = GridGeometry(8, 1.0)
    amb = assemble(grid, CoefficientField.identity())
    sys_ = restrict(amb, rasterize(Rectangle(0.25, 0.25, 0.75, 0.75), grid))
    expected = np.zeros((7, 7), bool)
    expected[2:5, 2:5] = True       # nodes 3/8, 4/8, 5/8 in each direction
    assert np.array_equal(sys_.node_mask(), expected)
    full = amb.K.toarray()
    assert np.array_equal(sys_.K.toarray(), full[np.ix_(sys_.index, sys_.index)])


def test_domain_smaller_than_a_cell_has_no_dofs():
    grid = GridGeometry(8, 1.0)
    amb = assemble(grid, CoefficientField.identity())
    one_cell = rasterize(Rectangle(0.4, 0.4, 0.5, 0.5), grid)
    assert len(one_cell) == 1
    with pytest.raises(EmptyDomain):
        restrict(amb, one_cell)
    with pytest.raises(EmptyDomain):
        restrict(amb, RasterSet(grid, np.eye(8, dtype=bool)))


# --- solves --------------------------------------------------------------

def test_zero_load_gives_zero_solution():
    grid = GridGeometry(8, 1.0)
    sys_ = restrict(assemble(grid, CoefficientField.identity()), RasterSet.full(grid))
    u = solve_dirichlet(sys_, lambda x, y: np.zeros_like(x))
    assert not np.any(u.values)


def test_poisson_square_oracle(unit_box_128):
    sys_ = restrict(unit_box_128, RasterSet.full(unit_box_128.grid))
    u = solve_dirichlet(sys_, ONE)
    assert u.values.max() == pytest.approx(square_poisson_max(), rel=0.01)
    b = unit_box_128.load(ONE)
    assert np.linalg.norm(sys_.K @ u.values - b) <= 1e-10 * np.linalg.norm(b)


def test_solution_is_linear_in_load():
    grid = GridGeometry(16, 1.0)
    sys_ = restrict(assemble(grid, CoefficientField.diagonal(1.0, 4.0)), RasterSet.full(grid))
    f = lambda x, y: np.sin(3 * x) + y  # noqa: E731
    u1 = solve_dirichlet(sys_, f).values
    u2 = solve_dirichlet(sys_, lambda x, y: 2 * f(x, y)).values
    assert np.allclose(u2, 2 * u1, rtol=1e-14, atol=1e-16)


def test_larger_domain_has_lower_energy():
    grid = GridGeometry(32, 1.0)
    amb = assemble(grid, CoefficientField.identity())
    small = rasterize(Rectangle(0.3, 0.3, 0.7, 0.7), grid)
    big = rasterize(Rectangle(0.2, 0.2, 0.8, 0.8), grid)
    s1, s2 = restrict(amb, small), restrict(amb, big)
    assert set(s1.index) <= set(s2.index)
    b = amb.load(ONE)
    u1 = solve_dirichlet(s1, ONE).ambient
    u2 = solve_dirichlet(s2, ONE).ambient
    # energy functional J(u) = -f(u)/2 at the solution
    assert b @ u2 >= b @ u1


def test_stability_bound_holds_for_anisotropic_coefficient():
    grid = GridGeometry(32, 1.0)
    amb = assemble(grid, CoefficientField.diagonal(1.0, 4.0))
    sys_ = restrict(amb, rasterize(Rectangle(0.1, 0.2, 0.9, 0.8), grid))
    u = solve_dirichlet(sys_, ONE).ambient
    b = amb.load(ONE)
    dual = math.sqrt(b @ amb.solve_ambient(b, "H1"))
    assert math.sqrt(u @ (amb.K0 @ u)) <= dual / amb.coeff.alpha


# --- norms ---------------------------------------------------------------

@pytest.fixture(scope="module")
def box_eigenpair():
    amb = assemble(GridGeometry(16, 1.0), CoefficientField.identity())
    vals, vecs = sla.eigh(amb.K.toarray(), amb.M.toarray(), subset_by_index=[0, 0])
    return amb, float(vals[0]), vecs[:, 0]


def test_rayleigh_identity(box_eigenpair):
    amb, lam, u = box_eigenpair
    nm = norms(amb, u)
    assert nm.L2 == pytest.approx(1.0, rel=1e-12)
    assert nm.V ** 2 == pytest.approx(lam, rel=1e-10)


def test_friedrichs_inequality_on_random_fields(box_eigenpair):
    amb = box_eigenpair[0]
    rng = np.random.default_rng(3)
    for _ in range(10):
        nm = norms(amb, rng.standard_normal(amb.ndof))
        assert nm.L <= nm.V * (1 + 1e-12)


def test_dual_norm_of_stiffness_image(box_eigenpair):
    amb = box_eigenpair[0]
    u = np.random.default_rng(4).standard_normal(amb.ndof)
    assert functional_dual_norm(amb, amb.K @ u) == pytest.approx(norms(amb, u).V, rel=1e-8)


def test_dual_norms_of_nodal_load(box_eigenpair):
    amb = box_eigenpair[0]
    f = np.random.default_rng(5).standard_normal(amb.ndof)
    dn = dual_norms(amb, f)
    b = amb.M @ f
    assert dn.V_dual == pytest.approx(math.sqrt(b @ np.linalg.solve(amb.K.toarray(), b)), rel=1e-10)
    assert dn.L_dual == pytest.approx(math.sqrt(f @ (amb.M @ f) / amb.p), rel=1e-12)


def test_exports(tmp_path):
    amb = assemble(GridGeometry(4, 1.0), CoefficientField.identity())
    export_coo(amb.K, tmp_path / "K.txt")
    rows = np.loadtxt(tmp_path / "K.txt")
    assert len(rows) == amb.K.nnz
    assert rows[:, 2].sum() == pytest.approx(amb.K.sum())
    export_field_csv(amb, np.arange(amb.ndof, dtype=float), tmp_path / "u.csv")
    grid_vals = np.loadtxt(tmp_path / "u.csv", delimiter=",")
    assert grid_vals.shape == (5, 5)
    assert grid_vals[0].sum() == 0 and grid_vals[1, 1] == 0.0 and grid_vals[1, 2] == 1.0


def test_ambient_system_type(unit_box_128):
    assert isinstance(unit_box_128, AmbientSystem)
    assert unit_box_128.ndof == 127 ** 2
