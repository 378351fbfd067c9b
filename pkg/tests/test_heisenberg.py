from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from holderint.forms import parse_form
from holderint.heisenberg import (DX, DY, TH, HorizontalPLArc, RuminError, RuminForm, arc_length_constant, h1,
                                  horizontal_arc, horizontal_arcs, horizontal_boundary_chain, horizontal_interpolate,
                                  horizontal_simplex, horizontal_telescope, line_integral, mat_dilate, mat_inv,
                                  mat_mul, random_rumin_form, rumin_boundary_check, rumin_d, rumin_d0, rumin_d1)
from holderint.integrate import integrate_over_chain
from holderint.maps import horizontal_boundary_square, planar_square, vertical_curve

frac = st.fractions(min_value=-3, max_value=3, max_denominator=5)
mpoint = st.tuples(frac, frac, frac)


def _same_vertices(lhs, rhs):
    # radicals defeat sympy.simplify, so compare at high precision
    return len(lhs.vertices) == len(rhs.vertices) and all(
        abs(sympy.N(sympy.sympify(a) - sympy.sympify(b), 60)) < 1e-40
        for u, v in zip(lhs.vertices, rhs.vertices) for a, b in zip(u, v))


@pytest.mark.parametrize("degree", [0, 1])
@given(seed=st.integers(0, 10 ** 6))
@settings(max_examples=25)
def test_rumin_d_squared_zero(degree, seed):
    w = random_rumin_form(np.random.default_rng(seed), degree)
    assert rumin_d(rumin_d(w)).is_zero()


@given(seed=st.integers(0, 10 ** 6))
@settings(max_examples=25)
def test_rumin_d1_lands_in_weight_three(seed):
    w = rumin_d1(random_rumin_form(np.random.default_rng(seed), 1))
    assert set(w.form.terms) <= {(DX, TH), (DY, TH)}


def test_rumin_d0_is_horizontal_gradient():
    x, y, z = sympy.symbols("x y z")
    w = rumin_d0(x * z)
    assert w.coefficient((DX,)) == z
    assert w.coefficient((DY,)) == x ** 2


def test_rumin_forms_reject_wrong_terms():
    with pytest.raises(RuminError):
        RuminForm.parse("dx^dy", 2)
    with pytest.raises(RuminError):
        RuminForm.parse("theta", 1)
    with pytest.raises(RuminError):
        rumin_d(RuminForm.parse("dx^dy^theta", 3))


@given(mpoint, mpoint)
@settings(max_examples=40)
def test_arcs_exact_endpoints_and_zero_holonomy(p, q):
    arc = horizontal_arc(p, q)
    assert tuple(arc.start) == tuple(sympy.Rational(v) for v in p)
    assert tuple(arc.end) == tuple(sympy.Rational(v) for v in q) or \
        all(sympy.simplify(a - sympy.nsimplify(b)) == 0 for a, b in zip(arc.end, q))
    assert all(v == 0 for v in arc.theta_integrals())
    assert arc.is_horizontal()
    assert len(arc) <= 5


@given(mpoint, mpoint, mpoint)
@settings(max_examples=25)
def test_arcs_translation_equivariant(p, q, g):
    lhs = horizontal_arc(mat_mul(g, p), mat_mul(g, q))
    rhs = horizontal_arc(p, q).translate(g)
    assert _same_vertices(lhs, rhs)


@given(mpoint, mpoint, st.sampled_from([Fraction(1, 2), Fraction(2), Fraction(3)]))
@settings(max_examples=25)
def test_arcs_dilation_equivariant(p, q, t):
    lhs = horizontal_arc(mat_dilate(t, p), mat_dilate(t, q))
    rhs = horizontal_arc(p, q).dilate(t)
    assert _same_vertices(lhs, rhs)


def test_arc_to_centre_has_four_segments():
    arc = horizontal_arc((0, 0, 0), (0, 0, 1))
    assert len(arc) == 4
    assert arc.end == (0, 0, 1)


def test_arc_length_constant_is_bounded():
    c = arc_length_constant(np.random.default_rng(0), samples=300)
    assert 1 <= c < 20


def test_matrix_helpers():
    p, q = (Fraction(1), Fraction(2), Fraction(3)), (Fraction(-1), Fraction(1, 2), Fraction(0))
    assert mat_mul(p, mat_inv(p)) == (0, 0, 0)
    assert mat_mul(p, q) == (0, Fraction(5, 2), Fraction(3) + Fraction(1, 2))


@pytest.mark.parametrize("n", [3, 4])
def test_horizontal_simplex_boundary(n):
    rng = np.random.default_rng(n)
    pts = [tuple(Fraction(int(v), 2) for v in rng.integers(-4, 5, size=3)) for _ in range(n)]
    S = horizontal_simplex(pts)
    assert S.boundary() == horizontal_boundary_chain(pts)


def test_horizontal_triangle_boundary_sees_no_theta():
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, Fraction(1, 3))]
    theta = parse_form("theta", h1(), "matrix")
    assert integrate_over_chain(horizontal_simplex(pts).boundary(), theta) == 0


@pytest.mark.parametrize("j", [0, 1, 2, 3])
def test_horizontal_telescope_identity(j):
    assert horizontal_telescope(vertical_curve(), j).identity_holds()


def test_horizontal_interpolants_see_no_theta():
    F = vertical_curve()
    form = parse_form("(1 + x*z) theta", h1(), "matrix")
    for j in range(3):
        assert line_integral(horizontal_arcs(F, j), form) == 0
        assert abs(integrate_over_chain(horizontal_interpolate(F, j), form)) < 1e-12


def test_line_integral_exact_value():
    arc = HorizontalPLArc(((0, 0, 0), (1, 0, 0), (1, 1, 1)))
    assert line_integral([arc], parse_form("y dx + x dy", h1(), "matrix")) == 1


@pytest.mark.parametrize("params", [((1,), (0, 1), 1), ((1, 2), (0, 1, 1), 2), ((2,), (0, 0, 1), 1)])
def test_rumin_boundary_on_horizontal_boundary_squares(params):
    F = horizontal_boundary_square(*params)
    rng = np.random.default_rng(sum(map(len, params[:2])))
    for _ in range(2):
        rep = rumin_boundary_check(F, random_rumin_form(rng, 1, max_degree=2))
        assert rep.passed


def test_rumin_boundary_fails_without_horizontal_boundary():
    rng = np.random.default_rng(0)
    reps = [rumin_boundary_check(planar_square(), random_rumin_form(rng, 1, max_degree=2)) for _ in range(4)]
    assert not any(r.passed for r in reps)


def test_rumin_d1_of_exact_horizontal_part():
    # x dy differs from dz by a multiple of the contact form
    assert rumin_d1(RuminForm.parse("x dy", 1)).is_zero()
    assert rumin_d1(RuminForm.parse("y dx", 1)).is_zero()
    assert rumin_d1(RuminForm.parse("x*x dy", 1)).form == parse_form("2 dx^theta", h1(), "matrix")
