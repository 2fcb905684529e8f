import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lieclf.errors import DegreeError, EmptyPieceSet
from lieclf.expr import VectorFieldDef
from lieclf.lie import (Leaf, Node, bracket, enumerate_brackets, eval_bracket,
                        eval_bracket_setvalued, extreme_points)

from test_expr import DIM, points, smooth_exprs

f1, f2, f3, f4 = (Leaf(i) for i in range(1, 5))


def test_degree_and_r():
    assert (f1.degree, f1.r) == (1, 1)
    assert Node(f1, f2).r == 4
    assert Node(f1, Node(f2, f3)).r == 10
    assert Node(f1, Node(f2, Node(f3, f4))).r == 22
    assert Node(Node(f1, f2), Node(f3, f4)).r == 16
    assert Node(Node(f1, f2), Node(f3, f4)).degree == 4


def test_labels():
    assert str(Node(f1, Node(f1, f2))) == "[f1,[f1,f2]]"
    assert str(Leaf(2, -1)) == "-f2"


def test_enumeration_sizes():
    assert [str(b) for b in enumerate_brackets(2, 1)] == ["f1", "-f1", "f2", "-f2"]
    assert [str(b) for b in enumerate_brackets(1, 3)] == ["f1", "-f1"]
    nonleaf = [b for b in enumerate_brackets(2, 3) if not isinstance(b, Leaf)]
    assert sorted(map(str, nonleaf)) == sorted(["[f1,f2]", "[f1,[f1,f2]]", "[f2,[f1,f2]]"])
    assert len([b for b in enumerate_brackets(3, 2) if b.degree == 2]) == 3


def test_enumeration_rejects_bad_degree():
    with pytest.raises(DegreeError):
        enumerate_brackets(2, 0)


def test_self_bracket_vanishes(cubic_pair):
    assert not np.any(eval_bracket(bracket(1, 1), cubic_pair, [0.3, 0.4, 0.5]))


def test_nonholonomic_bracket_constant(nonholonomic, rng):
    for x in rng.uniform(-3, 3, (20, 3)):
        assert eval_bracket(Node(f1, f2), nonholonomic, x).tolist() == [0.0, 0.0, 2.0]


def test_cubic_pair_brackets(cubic_pair, rng):
    for x in rng.uniform(-3, 3, (20, 3)):
        np.testing.assert_array_equal(eval_bracket(Node(f1, f2), cubic_pair, x),
                                      [0.0, 0.0, 2 * (x[0] - x[1])])
        np.testing.assert_array_equal(eval_bracket(Node(f1, Node(f1, f2)), cubic_pair, x),
                                      [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(eval_bracket(Node(f2, Node(f1, f2)), cubic_pair, x),
                                      [0.0, 0.0, -2.0])


# third component of [f1, f2]_set for f1 = (1, 0, |x2| - 2 x2), f2 = (0, 1, |x1| + 2 x1)
SET_TABLE = [
    ((1.0, 1.0, 0.0), (4.0, 4.0)),
    ((-1.0, -2.0, 3.0), (4.0, 4.0)),
    ((-1.0, 1.0, 0.0), (2.0, 2.0)),
    ((1.0, -1.0, 0.0), (6.0, 6.0)),
    ((0.0, 1.0, 0.5), (2.0, 4.0)),
    ((-0.5, 0.0, 0.5), (2.0, 4.0)),
    ((0.0, -1.0, 0.5), (4.0, 6.0)),
    ((0.7, 0.0, -1.0), (4.0, 6.0)),
    ((0.0, 0.0, 5.0), (2.0, 6.0)),
]


@pytest.mark.parametrize("x, interval", SET_TABLE)
def test_setvalued_bracket_table(lipschitz_sys, x, interval):
    vs = eval_bracket_setvalued(1, 2, lipschitz_sys, np.array(x))
    assert vs.interval(2) == interval
    assert not np.any(vs.vertices[:, :2])


def test_setvalued_self_bracket_is_zero(lipschitz_sys):
    vs = eval_bracket_setvalued(1, 1, lipschitz_sys, np.zeros(3))
    assert vs.vertices.tolist() == [[0.0, 0.0, 0.0]]


def test_setvalued_antisymmetry(lipschitz_sys):
    x = np.array([0.0, 0.0, 1.0])
    a = eval_bracket_setvalued(1, 2, lipschitz_sys, x)
    b = eval_bracket_setvalued(2, 1, lipschitz_sys, x)
    assert b.interval(2) == a.negated().interval(2)


def test_setvalued_support():
    from lieclf.lie import BracketValueSet

    vs = BracketValueSet(np.array([[0, 0, 2.0], [0, 0, 6.0]]))
    assert vs.support([0, 0, 1]) == 6.0
    assert vs.support([0, 0, -1]) == -2.0


def test_extreme_points_of_square_with_interior():
    V = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5], [1, 0]], float)
    E = extreme_points(V)
    assert sorted(map(tuple, E)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_extreme_points_collinear():
    V = np.array([[0, 0, 2.0], [0, 0, 4.0], [0, 0, 6.0]])
    assert sorted(extreme_points(V)[:, 2]) == [2.0, 6.0]


def test_no_owning_piece_raises():
    from lieclf.expr import Piece, PiecewiseVectorFieldDef
    from lieclf.parser import parse_expr
    from lieclf.system import SystemDef

    half = PiecewiseVectorFieldDef(1, (Piece((parse_expr("x1"),), VectorFieldDef.from_text(["1"])),))
    sysd = SystemDef(1, (half, half), smoothness="lipschitz", k=2)
    with pytest.raises(EmptyPieceSet):
        eval_bracket_setvalued(1, 2, sysd, np.array([-1.0]))


fields3 = st.lists(smooth_exprs, min_size=DIM, max_size=DIM).map(
    lambda cs: VectorFieldDef(DIM, tuple(cs)))


@settings(max_examples=25)
@given(fields3, fields3, points)
def test_antisymmetry(f, g, x):
    fl = [f, g]
    a = eval_bracket(Node(f1, f2), fl, x)
    b = eval_bracket(Node(f2, f1), fl, x)
    np.testing.assert_allclose(a, -b, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max()))


@settings(max_examples=15)
@given(fields3, fields3, fields3, points)
def test_jacobi_identity(f, g, h, x):
    fl = [f, g, h]
    terms = [eval_bracket(Node(f1, Node(f2, f3)), fl, x),
             eval_bracket(Node(f2, Node(f3, f1)), fl, x),
             eval_bracket(Node(f3, Node(f1, f2)), fl, x)]
    scale = max(1.0, max(np.abs(t).max() for t in terms))
    assert np.abs(sum(terms)).max() <= 1e-8 * scale
