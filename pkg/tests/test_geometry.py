from __future__ import annotations

import json
import math

import numpy as np
import pytest

from hpstab.errors import DomainError, EmptyDomain, MarginError, ModulusError
from hpstab.geometry import (CuspCone, Disk, GridGeometry, Modulus, Polygon, RasterSet, Rectangle,
                             co_gap, cone_contains, cusp_check, cusp_verdicts, dilate, erode,
                             from_boundary_graph, gap, hausdorff_distances, modulus_eval, phi,
                             phi_inv, phi_psi, psi, psi_inv, rasterize, shape_from_config)

from oracles import brute_co_gap, brute_cusp_verdicts, brute_dilate, brute_gap, brute_hausdorff


# --- moduli --------------------------------------------------------------

def test_lipschitz_modulus_value():
    assert modulus_eval(Modulus.lipschitz(1.0), 0.3) == pytest.approx(0.3)


def test_zero_modulus_vanishes():
    m = Modulus.zero()
    assert all(modulus_eval(m, r) == 0.0 for r in (0.0, 0.1, 7.0))


def test_hoelder_half_value():
    assert modulus_eval(Modulus.hoelder(0.5, 1.0), 0.04) == pytest.approx(0.2)


def test_phi_psi_lipschitz_unit():
    ps, ph = phi_psi(Modulus.lipschitz(1.0), 1.0)
    assert ps == pytest.approx(math.sqrt(2))
    assert ph == pytest.approx(2.0)


def test_phi_psi_zero_modulus():
    ps, ph = phi_psi(Modulus.zero(), 0.3)
    assert ps == pytest.approx(0.3)
    assert ph == pytest.approx(0.3)


def test_phi_inverse_lipschitz():
    assert phi_inv(Modulus.lipschitz(1.0), 1.0) == pytest.approx(0.5, abs=1e-11)


def test_inverse_rejects_target_below_offset():
    with pytest.raises(DomainError):
        phi_inv(Modulus.lipschitz(1.0, offset=0.2), 0.1)


def test_modulus_validation():
    with pytest.raises(DomainError):
        Modulus.hoelder(1.5)
    with pytest.raises(DomainError):
        Modulus.lipschitz(-1.0)
    with pytest.raises(DomainError):
        Modulus.tabulated([0.1, 0.2], [0.0, 0.1])


def test_tabulated_modulus_interpolates():
    m = Modulus.tabulated([0.0, 1.0, 2.0], [0.0, 2.0, 3.0])
    assert modulus_eval(m, 0.5) == pytest.approx(1.0)
    assert psi_inv(m, float(psi(m, 1.5))) == pytest.approx(1.5, abs=1e-9)


def test_modulus_config_round_trip():
    for m in (Modulus.zero(0.1), Modulus.lipschitz(2.0), Modulus.hoelder(0.5, 3.0)):
        assert Modulus.from_config(m.to_config()) == m


# --- rasterization -------------------------------------------------------

def test_disk_area_oracle():
    grid = GridGeometry(64, 1.0)
    X = rasterize(Disk(0.5, 0.5, 0.25), grid)
    assert X.area == pytest.approx(math.pi * 0.0625, rel=0.01)


def test_rectangle_cell_count():
    X = rasterize(Rectangle(0.25, 0.25, 0.75, 0.75), GridGeometry(4, 1.0))
    assert len(X) == 4


def test_zero_radius_disk_is_empty():
    with pytest.raises(EmptyDomain):
        rasterize(Disk(0.5, 0.5, 0.0), GridGeometry(16, 1.0))


def test_margin_enforced():
    with pytest.raises(MarginError):
        rasterize(Rectangle(0.0, 0.0, 1.0, 1.0), GridGeometry(16, 1.0))


def test_shape_config_matches_direct_construction():
    grid = GridGeometry(32, 1.0)
    cfg = {"kind": "difference",
           "a": {"kind": "rectangle", "min": [0.2, 0.2], "max": [0.8, 0.8]},
           "b": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.1}}
    direct = Rectangle(0.2, 0.2, 0.8, 0.8) - Disk(0.5, 0.5, 0.1)
    assert rasterize(shape_from_config(cfg), grid) == rasterize(direct, grid)


def test_polygon_triangle_area():
    grid = GridGeometry(128, 1.0)
    X = rasterize(Polygon(((0.1, 0.1), (0.9, 0.1), (0.1, 0.9))), grid)
    assert X.area == pytest.approx(0.32, rel=0.02)


# --- morphology ----------------------------------------------------------

@pytest.fixture(scope="module")
def half_square():
    grid = GridGeometry(80, 1.0)
    return rasterize(Rectangle(0.25, 0.25, 0.75, 0.75), grid)


def test_dilate_zero_is_identity(half_square):
    assert dilate(half_square, 0.0) == half_square


def test_erode_zero_is_identity(half_square):
    assert erode(half_square, 0.0) == half_square


def test_dilate_matches_brute_force(half_square):
    D = dilate(half_square, 0.1)
    assert np.array_equal(D.mask, brute_dilate(half_square, 0.1))


def test_dilated_square_bounding_box(half_square):
    D = dilate(half_square, 0.1)
    rows = np.flatnonzero(D.mask.any(axis=1))
    h = half_square.grid.h
    width = (rows[-1] - rows[0] + 1) * h
    assert abs(width - 0.7) <= 2 * h + 1e-12  # one cell at each edge


def test_eroded_square_side(half_square):
    E = erode(half_square, 0.1)
    rows = np.flatnonzero(E.mask.any(axis=1))
    h = half_square.grid.h
    assert abs((rows[-1] - rows[0] + 1) * h - 0.3) <= 2 * h + 1e-12  # one cell at each edge
    assert E.area == pytest.approx(((rows[-1] - rows[0] + 1) * h) ** 2)


def test_dilation_contains_set(half_square):
    assert half_square.issubset(dilate(half_square, 0.03))


def test_closing_contains_set():
    rng = np.random.default_rng(7)
    grid = GridGeometry(40, 1.0)
    for _ in range(5):
        mask = np.zeros(grid.shape, bool)
        mask[8:32, 8:32] = rng.random((24, 24)) < 0.5
        X = RasterSet(grid, mask)
        assert X.issubset(erode(dilate(X, 0.05), 0.05))


# --- gaps and distances --------------------------------------------------

@pytest.fixture(scope="module")
def wide_grid():
    return GridGeometry(96, 1.5, -0.125, -0.125)


def test_gap_to_self_is_zero(half_square):
    assert gap(half_square, half_square) == 0.0


def test_gap_of_shifted_unit_square(wide_grid):
    X = rasterize(Rectangle(0, 0, 1, 1), wide_grid)
    Y = rasterize(Rectangle(0.25, 0, 1.25, 1), wide_grid)
    value = gap(X, Y)
    assert value == pytest.approx(brute_gap(X, Y), abs=1e-12)
    assert abs(value - 0.25) <= wide_grid.h * math.sqrt(2)


def test_gap_of_subset_is_zero(wide_grid):
    X = rasterize(Rectangle(0.2, 0.2, 0.4, 0.4), wide_grid)
    Y = rasterize(Rectangle(0.1, 0.1, 0.6, 0.6), wide_grid)
    assert gap(X, Y) == 0.0


def test_gap_against_empty_is_infinite(half_square):
    assert gap(half_square, RasterSet.empty(half_square.grid)) == math.inf
    assert gap(RasterSet.empty(half_square.grid), half_square) == 0.0


def test_co_gap_matches_brute_force(wide_grid):
    X = rasterize(Disk(0.5, 0.5, 0.3), wide_grid)
    Y = rasterize(Rectangle(0.3, 0.25, 0.9, 0.7), wide_grid)
    assert co_gap(X, Y) == pytest.approx(brute_co_gap(X, Y), abs=1e-12)
    assert co_gap(Y, X) == pytest.approx(brute_co_gap(Y, X), abs=1e-12)


def test_identical_sets_have_zero_distances(half_square):
    d = hausdorff_distances(half_square, half_square)
    assert d.as_dict() == {"d_H": 0.0, "d_upper_H": 0.0, "d_HP": 0.0, "d_HS": 0.0}


def test_concentric_disks():
    grid = GridGeometry(64, 1.0)
    outer = rasterize(Disk(0.5, 0.5, 0.4), grid)
    inner = rasterize(Disk(0.5, 0.5, 0.3), grid)
    d = hausdorff_distances(outer, inner)
    for value in (d.d_H, d.d_upper_H, d.d_HP):
        assert abs(value - 0.1) <= 2 * grid.h
    assert (d.d_H, d.d_upper_H, d.d_HP) == pytest.approx(brute_hausdorff(outer, inner), abs=1e-12)


def test_translated_square():
    grid = GridGeometry(64, 1.0)
    X = rasterize(Rectangle(0.2, 0.2, 0.6, 0.6), grid)
    Y = rasterize(Rectangle(0.3, 0.2, 0.7, 0.6), grid)
    assert abs(hausdorff_distances(X, Y).d_H - 0.1) <= 2 * grid.h


def test_distances_reject_empty(half_square):
    with pytest.raises(EmptyDomain):
        hausdorff_distances(half_square, RasterSet.empty(half_square.grid))


# --- cones and the cusp condition ----------------------------------------

def test_flat_cone_contains_axis_point():
    assert cone_contains(CuspCone(Modulus.zero(), 1.0, (0.0, 1.0)), (0.0, 0.5))


def test_flat_cone_excludes_lower_half_plane():
    assert not cone_contains(CuspCone(Modulus.zero(), 1.0, (0.0, 1.0)), (0.9, -0.1))


def test_lipschitz_cone_side_region():
    assert cone_contains(CuspCone(Modulus.lipschitz(1.0), 1.0, (0.0, 1.0)), (0.3, 0.5))


def test_cone_rejects_non_unit_direction():
    with pytest.raises(DomainError):
        CuspCone(Modulus.zero(), 1.0, (0.0, 2.0))


def test_unit_square_passes_cusp_check():
    grid = GridGeometry(72, 1.125, -0.0625, -0.0625)
    X = rasterize(Rectangle(0, 0, 1, 1), grid)
    rep = cusp_check(X, Modulus.lipschitz(1.0), 0.05)
    assert rep.passed
    assert rep.failures == []


def test_corner_touching_squares_fail_at_corner():
    grid = GridGeometry(64, 1.0, -0.5, -0.5)
    X = rasterize(Rectangle(0, 0, 0.4, 0.4) | Rectangle(-0.4, -0.4, 0, 0), grid)
    rep = cusp_check(X, Modulus.lipschitz(1.0), 0.03)
    assert not rep.passed
    worst = min(rep.failures, key=lambda rec: rec.margin)
    assert math.hypot(*worst.point) <= 2 * grid.h
    assert worst.pair is not None


def test_disk_passes_cusp_check():
    grid = GridGeometry(64, 1.0, -0.5, -0.5)
    X = rasterize(Disk(0.0, 0.0, 0.4), grid)
    assert cusp_check(X, Modulus.lipschitz(1.0), 0.05).passed


def test_cusp_report_serializes():
    grid = GridGeometry(32, 1.0)
    X = rasterize(Disk(0.5, 0.5, 0.3), grid)
    rep = cusp_check(X, Modulus.lipschitz(1.0), 0.05, n_directions=16)
    data = json.loads(rep.to_json())
    assert data["pass"] == rep.passed
    assert len(data["records"]) == len(rep.records)


def test_cusp_check_matches_brute_force_on_square():
    grid = GridGeometry(32, 1.0)
    mask = np.zeros(grid.shape, bool)
    mask[8:24, 8:16] = True
    X = RasterSet(grid, mask)
    m = Modulus.lipschitz(1.0)
    for cell in [(16, 15), (8, 12), (23, 8)]:
        for xi in [(0.0, 1.0), (-1.0, 0.0), (math.sqrt(0.5), -math.sqrt(0.5))]:
            assert cusp_verdicts(X, m, 0.05, cell, xi) == brute_cusp_verdicts(X, m, 0.05, cell, xi)


def test_single_cell_spike_separates_the_two_cusp_conditions():
    """An isolated inside cell placed just above the top edge of a rectangle.

    The outside cell between the edge and the spike sits within the checked
    radius of the boundary sample while the spike itself does not, so the
    "inside stays inside" check fails and the "outside stays outside" check
    passes.  The brute-force enumeration agrees.
    """
    grid = GridGeometry(32, 1.0)
    mask = np.zeros(grid.shape, bool)
    mask[8:24, 8:16] = True
    cell, xi, m, r = (16, 15), (0.0, 1.0), Modulus.lipschitz(1.0), 0.05
    X = RasterSet(grid, mask)
    assert cusp_verdicts(X, m, r, cell, xi) == (True, True)
    mask[14, 21] = True
    spiked = RasterSet(grid, mask)
    assert brute_cusp_verdicts(spiked, m, r, cell, xi) == (False, True)
    assert cusp_verdicts(spiked, m, r, cell, xi) == (False, True)


# --- boundary graphs -----------------------------------------------------

def test_flat_graph_is_rectangle():
    grid = GridGeometry(32, 1.0)
    t = np.linspace(0, 1, 33)
    X = from_boundary_graph(t, np.full_like(t, 0.5), "below", Modulus.lipschitz(1.0), 1.0, grid)
    h = grid.h
    expected = rasterize(Rectangle(h, h, 1 - h, 0.5), grid)
    assert X == expected


def test_sine_graph_passes_validation():
    grid = GridGeometry(64, 1.0)
    t = np.linspace(0, 1, 257)
    g = 0.5 + 0.1 * np.sin(2 * np.pi * t)
    X = from_boundary_graph(t, g, "below", Modulus.lipschitz(1.0), 0.2 * np.pi, grid)
    assert not X.is_empty


def test_steep_sawtooth_rejected():
    grid = GridGeometry(64, 1.0)
    t = np.linspace(0, 1, 201)
    g = 0.3 + 0.3 * np.abs(((10 * t / 0.3) % 2) - 1)
    with pytest.raises(ModulusError):
        from_boundary_graph(t, g, "below", Modulus.lipschitz(1.0), 1.0, grid)
