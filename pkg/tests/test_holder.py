import math

import numpy as np
import pytest

from holderint.forms import parse_form
from holderint.heisenberg import h1
from holderint.holder import (ExponentConditionError, ToleranceExhausted, VariationFunction, additivity_check,
                              closed_cycle_J, dyadic_pp_variation, estimate_J, exponent_threshold, fit_slope,
                              h_identity_check, simplex_constant, neville, stokes_check, telescope_counts,
                              telescoping_rate, towghi_check, vanishing_check, vanishing_threshold,
                              weight2_towghi_decomposition)
from holderint.maps import (cube_faces, horizontal_boundary_square, horizontal_curve_map, planar_square,
                            takagi_sheet, unit_cube, vertical_square)

G = h1()


def form(text):
    return parse_form(text, G, "matrix")


def test_thresholds():
    assert exponent_threshold(form("dx^dy"), 2) == pytest.approx(1 / 2)
    assert exponent_threshold(form("dy^theta"), 2) == pytest.approx(1 / 3)
    assert exponent_threshold(form("dy^theta"), 2, closed_source=True) == 0
    # d(z dx^dy) has weight 4
    assert exponent_threshold(form("z dx^dy"), 2) == pytest.approx(1 / 2)
    assert exponent_threshold(form("z dx^dy"), 2, closed_source=True) == pytest.approx(1 / 2)
    assert vanishing_threshold(form("dx^theta"), 2) == pytest.approx(2 / 3)


def test_telescope_counts():
    assert telescope_counts(1) == (0, 1)
    assert telescope_counts(2) == (1, 14)


def test_simplex_constant_positive_and_cached():
    c = simplex_constant("heisenberg-1", 2, 3, samples=100)
    assert c > 0 and math.isfinite(c)
    assert simplex_constant("heisenberg-1", 2, 3, samples=100) == c


def test_neville_recovers_linear_in_h():
    hs = [0.5 ** j for j in range(4)]
    assert neville(hs, [2 + 3 * h for h in hs]) == pytest.approx(2)


def test_fit_slope():
    js = list(range(6))
    assert fit_slope(js, [3 * 2.0 ** (-0.75 * j) for j in js]) == pytest.approx(-0.75)
    assert math.isnan(fit_slope([1], [1.0]))


def test_planar_square_area():
    r = estimate_J(planar_square(), form("dx^dy"))
    assert r.value == pytest.approx(1, abs=1e-9)
    assert r.certificate == "classical" and r.converged


def test_vertical_square_weight_three_form():
    r = estimate_J(vertical_square(), form("(1 + y*y) dy^theta"), tol=1e-8)
    assert r.value == pytest.approx(4 / 3, abs=1e-8)


def test_rows_have_increment_bounds():
    r = estimate_J(vertical_square(), form("dy^theta"), measure=True, max_level=4)
    rows = r.rows()
    assert rows[0][0] == 0 and all(len(row) == 5 for row in rows)


def test_exponent_condition_refused():
    with pytest.raises(ExponentConditionError):
        estimate_J(takagi_sheet(0.6), form("dy^theta"))


def test_degree_mismatch():
    with pytest.raises(ValueError):
        estimate_J(planar_square(), form("dx"))


def test_takagi_sheet_value_is_drift():
    # T_beta vanishes at 0 and 1, so the flux of dy^dz is the drift alone
    for drift in (0, 1, 2):
        r = estimate_J(takagi_sheet(0.9, drift), form("dy^theta"), max_level=6)
        assert r.value == pytest.approx(drift, abs=1e-9)
        assert r.certificate == "telescoping"
        assert r.tail < math.inf


def test_strict_raises_when_tolerance_not_met():
    with pytest.raises(ToleranceExhausted) as info:
        estimate_J(takagi_sheet(0.9, 1), form("dy^theta"), max_level=4, tol=1e-12, strict=True)
    assert info.value.result.level == 4


@pytest.mark.parametrize("text", ["z dy", "x*z dy + y dx", "(1 + y) theta"])
def test_stokes_vertical_square(text):
    rep = stokes_check(vertical_square(), form(text))
    assert rep.passed
    assert all(v == 0 for v in rep.level_residuals)


def test_stokes_takagi_sheet():
    rep = stokes_check(takagi_sheet(0.9, 1), form("z dy"), max_level=6)
    assert rep.passed


def test_closed_cycle_matches_interior_flux():
    cycle = cube_faces(unit_cube(2))
    r = closed_cycle_J(vertical_square(), cycle, form("z dy"))
    inner = estimate_J(vertical_square(), form("z dy").d())
    assert r.value == pytest.approx(inner.value, abs=1e-9)


def test_vanishing_on_horizontal_curve():
    v = vanishing_check(horizontal_curve_map(), form("dx^theta"))
    assert v.precondition and v.passed
    assert abs(v.value) < 1e-8
    assert v.fitted == pytest.approx(v.predicted, abs=0.1)


@pytest.mark.parametrize("beta", [0.4, 0.6])
def test_takagi_direct_sum_exponent(beta):
    v = vanishing_check(takagi_sheet(beta), form("dy^theta"), levels=8)
    assert v.fitted == pytest.approx(v.predicted, abs=0.1)


def test_telescoping_rate_vertical_square():
    _, vals, slope = telescoping_rate(vertical_square(), form("dy^theta"), levels=7)
    assert slope == pytest.approx(-0.5, abs=0.1)
    assert all(v >= 0 for v in vals)


def test_additivity():
    parent, total, allowed = additivity_check(vertical_square(), form("z dy^theta"))
    assert abs(parent - total) <= allowed


def test_variation_function_from_callable():
    g = VariationFunction.from_callable(lambda s, t: s * t)
    inc = g.increments(3)
    assert inc.shape == (8, 8)
    assert np.sum(inc) == pytest.approx(1)
    assert np.allclose(inc, 1 / 64)


def test_pp_variation_finite_and_monotone():
    g = VariationFunction.from_integral(takagi_sheet(0.8, 1), form("dy^theta"), 5, 7)
    var = dyadic_pp_variation(g, 2 / (3 * 0.4), 5)
    assert math.isfinite(var.value) and var.monotone


@pytest.mark.parametrize("F,f", [(vertical_square(), "1 + y*y"), (takagi_sheet(0.8, 1), "z"),
                                 (horizontal_boundary_square(), "1 + x*y")])
def test_towghi_sums_match_direct(F, f):
    rep = towghi_check(F, f, form("dy^theta"), chart="matrix")
    assert rep.passed
    assert math.isfinite(rep.variation.value)


def test_towghi_vertical_square_exact():
    rep = towghi_check(vertical_square(), "1 + y*y", form("dy^theta"), chart="matrix")
    assert rep.direct == pytest.approx(4 / 3, abs=1e-9)
    assert rep.sums["lower-left"] <= 4 / 3 <= rep.sums["upper-right"]


def test_weight2_decomposition():
    rep = weight2_towghi_decomposition(horizontal_boundary_square(), "1 + x*y")
    assert rep.passed


def test_h_identity():
    assert h_identity_check(horizontal_boundary_square()).passed
