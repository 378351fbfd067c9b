from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holderint.maps import (horizontal_boundary_square, parse_map, planar_square, takagi, takagi_sheet,
                            vertical_square)


def brute_takagi(x, beta, terms=60):
    return sum(2.0 ** (-n * beta) * abs(2 ** n * x - round(2 ** n * x)) for n in range(terms))


@given(st.integers(0, 2 ** 10), st.sampled_from([0.3, 0.5, 0.8]))
@settings(max_examples=60)
def test_takagi_matches_series_at_dyadics(m, beta):
    x = m / 2 ** 10
    assert takagi(np.array([x]), beta)[0] == pytest.approx(brute_takagi(x, beta), abs=1e-12)


def test_takagi_endpoints_and_midpoint():
    assert takagi(np.array([0.0, 1.0]), 0.5).tolist() == [0.0, 0.0]
    assert takagi(np.array([0.5]), 0.5)[0] == pytest.approx(0.5)


def test_holder_constant_estimates():
    assert vertical_square().estimate_holder_constant(levels=6) < 10
    c = takagi_sheet(0.8).estimate_holder_constant(levels=6)
    assert np.isfinite(c) and c > 0


@given(st.fractions(0, 1, max_denominator=16))
@settings(max_examples=30)
def test_horizontal_boundary_lines_are_horizontal(t):
    # along t = const the z-derivative equals x times the y-derivative
    F = horizontal_boundary_square((1, 2), (0, 1, 1), 2)
    h = 1e-6
    for s in (0.1, 0.4, 0.8):
        a, b = F.evaluator(np.array([[s - h, float(t)], [s + h, float(t)]]))
        mid = F.evaluator(np.array([[s, float(t)]]))[0]
        dy, dz = (b[1] - a[1]) / (2 * h), (b[2] - a[2]) / (2 * h)
        assert dz == pytest.approx(mid[0] * dy, abs=1e-6)


def test_horizontal_boundary_vanishes_on_sides():
    F = horizontal_boundary_square((1, 2), (0, 1, 1), 2)
    pts = np.array([[0.0, 0.3], [1.0, 0.7]])
    assert np.allclose(F.evaluator(pts)[:, 0], 0)


def test_parse_map():
    F = parse_map("takagi-sheet:beta=0.7,drift=1")
    assert F.params == {"beta": 0.7, "drift": 1}
    assert F.alpha == pytest.approx(0.35)
    assert parse_map("horizontal-boundary:c=1;2,mu=0;1;1,nu=2").name == "horizontal-boundary"
    assert parse_map("planar-square:scale=1/2").params["scale"] == Fraction(1, 2)
    with pytest.raises(KeyError):
        parse_map("nope")


def test_planar_grid_is_exact():
    g = planar_square().grid(1)
    assert g[1][1][0] == Fraction(1, 2)
