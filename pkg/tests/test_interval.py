from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from breadthone.errors import IntervalError
from breadthone.interval import IArray, Interval, ieval_poly, imatmul
from breadthone.poly import Polynomial, eval_poly, parse_polynomial

from helpers import containment_violations, encloses

F = Fraction


# -- examples ------------------------------------------------------------------------------

def test_scalar_examples():
    s = Interval(1, 2) + Interval(3, 4)
    assert s.lo <= 4 and s.hi >= 6
    p = Interval(-1, 2) * Interval(3, 4)
    assert p.lo <= -4 and p.hi >= 8
    d = 1 / Interval(2, 4)
    assert d.lo <= 0.25 and d.hi >= 0.5
    h = Interval(1, 2).hull(Interval(5, 6))
    assert h.lo <= 1 and h.hi >= 6
    sc = Interval(1, 2).scale(F(1, 3))
    assert encloses(sc, F(1, 3)) and encloses(sc, F(2, 3))


def test_exact_inputs_are_enclosed():
    third = Interval(F(1, 3))
    assert third.lo < third.hi and encloses(third, F(1, 3))
    assert Interval(3).lo == Interval(3).hi == 3.0


def test_scalar_errors():
    with pytest.raises(IntervalError):
        Interval(1, 2) / Interval(-1, 1)
    with pytest.raises(IntervalError):
        Interval(2, 1)
    with pytest.raises(IntervalError):
        Interval(1e308, 1.7e308) * Interval(10, 10)
    with pytest.raises(IntervalError):
        Interval(float("inf"))


def test_ieval_examples():
    x2 = parse_polynomial("x^2", ["x"])
    r = ieval_poly(x2, [Interval(-1, 2)])
    assert r.lo <= 0 and r.hi >= 4
    c = ieval_poly(Polynomial.constant(F(7), 2), [Interval(0, 1), Interval(3, 5)])
    assert c.lo == c.hi == 7
    s = ieval_poly(parse_polynomial("x1+x2", ["x1", "x2"]), [Interval(0, 1), Interval(0, 1)])
    assert s.lo <= 0 and s.hi >= 2


# -- containment properties ----------------------------------------------------------------

def test_containment_random_ops():
    assert containment_violations(3000, seed=1) == 0


@given(p=st.lists(st.tuples(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                            st.fractions(-20, 20, max_denominator=7)), min_size=1, max_size=6),
       x=st.tuples(st.fractions(-3, 3, max_denominator=9), st.fractions(-3, 3, max_denominator=9)))
def test_ieval_point_box_contains_value(p, x):
    poly = Polynomial(2, dict(p))
    r = ieval_poly(poly, [Interval(v) for v in x])
    assert encloses(r, eval_poly(poly, list(x)))


@given(x=st.tuples(st.fractions(-2, 2, max_denominator=9), st.fractions(-2, 2, max_denominator=9)),
       w=st.fractions(0, 1, max_denominator=50))
def test_ieval_box_contains_range_samples(x, w):
    poly = parse_polynomial("x1^3 - 2*x1*x2 + (1/3)*x2^2 - 5", ["x1", "x2"])
    box = [Interval(v - w, v + w) for v in x]
    r = ieval_poly(poly, box)
    for t in (F(0), F(1, 3), F(1)):
        pt = [v - w + 2 * w * t for v in x]
        assert encloses(r, eval_poly(poly, pt))


def test_iarray_ops_contain_exact():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        A, B = IArray(a), IArray(b)
        C = imatmul(A, B)
        exact = [[sum(F(a[i, k]) * F(b[k, j]) for k in range(4)) for j in range(2)] for i in range(3)]
        for i in range(3):
            for j in range(2):
                assert F(C.lo[i, j]) <= exact[i][j] <= F(C.hi[i, j])
        S = A + IArray(rng.standard_normal((3, 4)))
        assert np.all(S.lo <= S.hi)


def test_imatmul_with_wide_intervals():
    rng = np.random.default_rng(4)
    for _ in range(100):
        lo = rng.standard_normal((3, 3))
        A = IArray(lo, lo + rng.random((3, 3)))
        x = rng.standard_normal(3)
        # any point matrix inside A times x is inside A @ x
        t = rng.random((3, 3))
        pick = A.lo + t * (A.hi - A.lo)
        y = imatmul(A, IArray(x))
        exact = [sum(F(pick[i, k]) * F(x[k]) for k in range(3)) for i in range(3)]
        assert all(F(y.lo[i]) <= exact[i] <= F(y.hi[i]) for i in range(3))


def test_iarray_predicates():
    Y = IArray(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    X = IArray(np.array([-0.5, 0.0]), np.array([0.5, 0.9]))
    assert X.subset_interior(Y)
    assert not Y.subset_interior(Y)
    assert np.array_equal(Y.width(), [2.0, 2.0])
    assert np.array_equal(X.mid(), [0.0, 0.45])
