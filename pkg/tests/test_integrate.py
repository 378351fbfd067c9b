from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from holderint.chains import Chain, straight_simplex
from holderint.forms import parse_form
from holderint.integrate import (IntegrationError, aggregate, classical_integral, cube_integrals, grundmann_moeller,
                                 integrate_over_chain, integrate_over_simplex, level_integral,
                                 monomial_simplex_integral, rule_arrays, straight_simplex_integrals)
from holderint.lie import group
from holderint.maps import planar_square, random_polynomial_map, vertical_square

H1 = group("heisenberg-1")
frac = st.fractions(min_value=-2, max_value=2, max_denominator=3)


def rpoint(data, n=3):
    return tuple(data.draw(st.lists(frac, min_size=n, max_size=n)))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("degree", [1, 3, 7, 9])
def test_gm_weights_sum_to_volume(k, degree):
    _, w = grundmann_moeller(k, degree)
    assert sum(w) == Fraction(1, factorial(k))


@given(st.integers(1, 3).flatmap(lambda k: st.lists(st.integers(0, 3), min_size=k + 1, max_size=k + 1)))
@settings(max_examples=60)
def test_gm_exact_on_monomials(exps):
    k = len(exps) - 1
    nodes, weights = rule_arrays(k, 7, exact=True)
    if sum(exps) > 7:
        return
    val = sum(w * np.prod([n[i] ** a for i, a in enumerate(exps)]) for n, w in zip(nodes, weights))
    assert val == monomial_simplex_integral(exps)


def test_monomial_oracle_value():
    assert monomial_simplex_integral((2, 3, 4)) == Fraction(2 * 6 * 24, factorial(11))
    assert monomial_simplex_integral((0, 0, 0)) == Fraction(1, 2)


def symbolic_straight_integral(G, verts, form):
    """Oracle: sympy pullback through the straight simplex parametrisation."""
    s = straight_simplex(G, verts)
    exprs, lams = s.expression
    return classical_integral(form, exprs, lams, chart="exp", domain="simplex")


def test_unit_triangle_values():
    tri = [(0, 0, 0), (1, 0, 0), (0, 1, 0)]
    s = straight_simplex(H1, [tuple(Fraction(x) for x in v) for v in tri])
    assert integrate_over_simplex(s, parse_form("dx^dy", H1, "matrix")) == Fraction(1, 2)
    assert integrate_over_simplex(s, parse_form("dx^theta", H1, "matrix")) == Fraction(-1, 12)
    # the triangle that is flat in the matrix chart
    u, v = sympy.symbols("u v")
    flat = classical_integral(parse_form("dx^theta", H1, "matrix"), [u, v, 0], [u, v], chart="matrix",
                              domain="simplex")
    assert flat == sympy.Rational(-1, 6)


@given(data=st.data())
@settings(max_examples=15)
def test_straight_integral_matches_symbolic_oracle(data):
    verts = [rpoint(data) for _ in range(3)]
    form = parse_form(data.draw(st.sampled_from(["dx^theta", "x dy^theta", "(1 + z) dx^dy", "y*y dx^theta"])),
                      H1, "matrix")
    s = straight_simplex(H1, verts)
    assert integrate_over_simplex(s, form) == symbolic_straight_integral(H1, verts, form)


@given(data=st.data())
@settings(max_examples=20)
def test_exact_stokes_on_straight_simplices(data):
    verts = [rpoint(data) for _ in range(3)]
    form = parse_form(data.draw(st.sampled_from(["x dy", "z dx + y*y dy", "x*z theta", "theta"])), H1, "matrix")
    c = Chain.simplex(verts)
    assert integrate_over_chain(c, form.d()) == integrate_over_chain(c.boundary(), form)


@given(data=st.data())
@settings(max_examples=10)
def test_exact_stokes_on_tetrahedra_h2(data):
    G = group("heisenberg-2")
    verts = [rpoint(data, 5) for _ in range(4)]
    form = parse_form("x1*th5^th2 + th1^th3", G, "exp")
    c = Chain.simplex(verts)
    assert integrate_over_chain(c, form.d()) == integrate_over_chain(c.boundary(), form)


@pytest.mark.parametrize("form", ["x1 th2 + x3*th4", "th1 + x2*x4*th3"])
def test_float_stokes_step3(form):
    G = group("engel")
    rng = np.random.default_rng(0)
    w = parse_form(form, G, "exp")
    for _ in range(3):
        V = rng.normal(size=(1, 3, G.n)) * 0.7
        inner = straight_simplex_integrals(G, V, w.d())[0]
        faces = [V[:, [1, 2]], V[:, [0, 2]], V[:, [0, 1]]]
        edge = sum((-1) ** i * straight_simplex_integrals(G, f, w)[0] for i, f in enumerate(faces))
        assert inner == pytest.approx(edge, abs=1e-11)


def test_affine_and_general_quadrature_agree():
    rng = np.random.default_rng(2)
    V = rng.normal(size=(5, 3, 3))
    form = parse_form("x*y dx^theta + dy^theta", H1, "matrix")
    from holderint.integrate import affine_simplex_integrals
    assert np.allclose(affine_simplex_integrals(V, form), straight_simplex_integrals(H1, V, form))


def test_degree_mismatch_rejected():
    with pytest.raises(IntegrationError):
        integrate_over_chain(Chain.simplex([(0, 0, 0), (1, 0, 0)]), parse_form("dx^dy", H1, "matrix"))


def test_planar_and_vertical_square_levels_exact():
    P, V = planar_square(), vertical_square()
    for j in range(3):
        assert level_integral(P, parse_form("dx^dy", H1, "matrix"), j, exact=True) == 1
        assert level_integral(P, parse_form("dx^theta", H1, "matrix"), j, exact=True) == Fraction(-1, 2)
        assert level_integral(P, parse_form("dy^theta", H1, "matrix"), j, exact=True) == 0
        assert level_integral(V, parse_form("dy^theta", H1, "matrix"), j, exact=True) == 1


def test_exact_and_float_levels_agree():
    F = random_polynomial_map(np.random.default_rng(11))
    form = parse_form("(1 + x*z) dx^theta + y dx^dy", H1, "matrix")
    for j in range(3):
        e = level_integral(F, form, j, exact=True)
        f = level_integral(F, form, j)
        assert float(e) == pytest.approx(f, rel=1e-12, abs=1e-12)


def test_workers_do_not_change_result():
    F = random_polynomial_map(np.random.default_rng(12))
    form = parse_form("x dx^theta", H1, "matrix")
    import holderint.integrate as integ
    old = integ.STRIP_SIMPLICES
    integ.STRIP_SIMPLICES = 64
    try:
        a = level_integral(F, form, 5, workers=1)
        b = level_integral(F, form, 5, workers=4)
    finally:
        integ.STRIP_SIMPLICES = old
    assert a == b


def test_cube_integrals_sum_and_aggregate():
    F = random_polynomial_map(np.random.default_rng(13))
    form = parse_form("dx^theta + z dx^dy", H1, "matrix")
    cubes = cube_integrals(F, form, 4)
    assert cubes.shape == (16, 16)
    assert cubes.sum() == pytest.approx(level_integral(F, form, 4), abs=1e-12)
    coarse = aggregate(cubes, 2)
    assert coarse.shape == (4, 4)
    assert coarse.sum() == pytest.approx(cubes.sum(), abs=1e-12)


def test_classical_integral_examples():
    s, t = sympy.symbols("s t")
    assert classical_integral(parse_form("dy^theta", H1, "matrix"), [0, s, t], [s, t]) == 1
    assert classical_integral(parse_form("dx^theta", H1, "matrix"), [s, t, 0], [s, t]) == sympy.Rational(-1, 2)
