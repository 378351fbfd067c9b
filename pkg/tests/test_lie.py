from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderint.lie import AlgebraError, ChartError, GradedLieAlgebra, abelian, catalog_names, group, load_algebra

STEP2 = ["heisenberg-1", "heisenberg-2", "free-2-step-2", "quaternionic-heisenberg-1"]
ALL = catalog_names()

frac = st.fractions(min_value=-3, max_value=3, max_denominator=6)


def point(G, data):
    return np.array(data.draw(st.lists(frac, min_size=G.n, max_size=G.n)), dtype=object)


@pytest.mark.parametrize("name", ALL)
def test_catalog_algebras_validate(name):
    alg = load_algebra(name)
    alg.check()
    assert len(alg.layers[0]) >= 1
    assert alg.hausdorff_dimension == sum(alg.weights)


@pytest.mark.parametrize("name", ["heisenberg-1", "engel", "free-2-step-3", "heisenberg-2"])
@given(data=st.data())
def test_group_law_associative_exact(name, data):
    G = group(name)
    a, b, c = point(G, data), point(G, data), point(G, data)
    lhs = G.mul_exp(G.mul_exp(a, b), c)
    rhs = G.mul_exp(a, G.mul_exp(b, c))
    assert all(x == y for x, y in zip(lhs, rhs))


@pytest.mark.parametrize("name", ALL)
@given(data=st.data())
def test_inverse_and_identity(name, data):
    G = group(name)
    a = point(G, data)
    e = np.array([Fraction(0)] * G.n, dtype=object)
    assert list(G.mul_exp(a, -a)) == list(e)
    assert list(G.mul_exp(e, a)) == list(a)


@pytest.mark.parametrize("name", ["heisenberg-1", "engel", "quaternionic-heisenberg-1"])
@given(data=st.data(), t=st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=5))
def test_dilations_are_automorphisms(name, data, t):
    G = group(name)
    a, b = point(G, data), point(G, data)
    lhs = G.dilate_exp(t, G.mul_exp(a, b))
    rhs = G.mul_exp(G.dilate_exp(t, a), G.dilate_exp(t, b))
    assert list(lhs) == list(rhs)


@given(data=st.data())
def test_heisenberg_matrix_chart_law(data):
    G = group("heisenberg-1")
    p = data.draw(st.lists(frac, min_size=3, max_size=3))
    q = data.draw(st.lists(frac, min_size=3, max_size=3))
    pm, qm = G.point(p, "matrix"), G.point(q, "matrix")
    prod = G.convert(G.mul(pm, qm), "matrix")
    assert tuple(prod) == (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])


@given(data=st.data())
def test_chart_round_trip(data):
    G = group("heisenberg-1")
    p = np.array(data.draw(st.lists(frac, min_size=3, max_size=3)), dtype=object)
    assert list(G.from_exp(G.to_exp(p, "matrix"), "matrix")) == list(p)


@pytest.mark.parametrize("name", ["heisenberg-1", "engel", "heisenberg-2"])
def test_homogeneous_norm_scales(name):
    G = group(name)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(50, G.n))
    for t in (0.25, 3.0):
        assert np.allclose(G.norm_exp(G.dilate_exp(t, a)), t * G.norm_exp(a))


def test_distance_left_invariant():
    G = group("engel")
    rng = np.random.default_rng(1)
    a, b, g = rng.normal(size=(3, 20, G.n))
    assert np.allclose(G.dist_exp(G.mul_exp(g, a), G.mul_exp(g, b)), G.dist_exp(a, b))


def test_heisenberg_bracket_and_q():
    alg = load_algebra("heisenberg-1")
    assert alg.weights == (1, 1, 2)
    assert alg.hausdorff_dimension == 4
    assert list(alg.bracket([1, 0, 0], [0, 1, 0])) == [0, 0, 1]


def test_abelian_group_is_vector_addition():
    G = group(abelian(3))
    assert list(G.mul_exp(np.array([1, 2, 3], dtype=object), np.array([4, 5, 6], dtype=object))) == [5, 7, 9]


def test_invalid_algebra_rejected():
    # [X, Y] = Z with Z in layer 1 breaks the grading
    rec = {"name": "bad", "layer_dims": [3], "structure_constants": [[0, 1, 2, 1, 1]]}
    with pytest.raises(AlgebraError):
        GradedLieAlgebra.from_record(rec)


def test_record_round_trip():
    alg = load_algebra("engel")
    assert GradedLieAlgebra.from_record(alg.to_record()) == alg


def test_unknown_chart_and_algebra():
    G = group("engel")
    with pytest.raises(ChartError):
        G.point((0, 0, 0, 0), "matrix")
    with pytest.raises(KeyError):
        load_algebra("no-such-algebra")
