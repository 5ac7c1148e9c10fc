import random
from fractions import Fraction

import numpy as np
import pytest

from breadthone.dualspace import (DiffFunctional, construct_dual_basis, lk_pk_step, msb1,
                                  null_vector_normalized, phi_op, psi_op)
from breadthone.errors import BreadthNotOne, MultiplicityCapExceeded, ZeroMatrix
from breadthone.poly import apply_functional, eval_poly, parse_system

from helpers import (check_invariants, cubic_chain, delta_oracle, mu4, macaulay_multiplicity, ojika,
                     quadratic_chain, random_breadth_one)

F = Fraction


def D(*pairs):
    """Functional from (exponent, coefficient) pairs."""
    n = len(pairs[0][0])
    return DiffFunctional(n, {e: c for e, c in pairs})


# -- operators -----------------------------------------------------------------------------

def test_phi_examples():
    assert phi_op(DiffFunctional.d(2, 1), 0) == DiffFunctional.d(1, 1)
    assert phi_op(DiffFunctional.d(1, 0), 1).is_zero()
    lam3 = D(((2, 0), 1), ((1, 1), F(-1, 2)), ((0, 2), F(1, 4)), ((0, 1), F(-1, 8)))
    assert phi_op(lam3, 0) == D(((1, 0), 1), ((0, 1), F(-1, 2)))


def test_psi_examples():
    assert psi_op(DiffFunctional.d(0, 1), 0) == DiffFunctional.d(1, 1)
    assert psi_op(DiffFunctional.d(1, 1), 1).is_zero()
    assert psi_op(DiffFunctional.d(0, 1), 1) == DiffFunctional.d(0, 2)


# -- null vector -----------------------------------------------------------------------------

def test_null_vector_examples():
    t, a2 = null_vector_normalized(np.array([[2.0, 1.0], [1.0, 0.5]]))
    assert t == 1 and np.allclose(a2, [1.0, -0.5], atol=1e-15)
    t, a2 = null_vector_normalized(np.array([[F(0), F(0)], [F(1), F(0)]], dtype=object))
    assert t == 1 and list(a2) == [1, 0]
    t, a2 = null_vector_normalized(np.array([[0.0]]))
    assert t == 0 and list(a2) == [1.0]


def test_null_vector_errors():
    with pytest.raises(BreadthNotOne):
        null_vector_normalized(np.eye(2))
    with pytest.raises(ZeroMatrix):
        null_vector_normalized(np.zeros((2, 2)))
    with pytest.raises(BreadthNotOne):
        null_vector_normalized(np.diag([1.0, 0.0, 0.0]))


def test_null_vector_entries_bounded():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n - 1))
        J = np.column_stack([A @ rng.standard_normal(n - 1), A])[:, rng.permutation(n)]
        t, a2 = null_vector_normalized(J)
        assert a2[0] == 1 and np.all(np.abs(a2) <= 1 + 1e-12)


# -- L_k / P_k ---------------------------------------------------------------------------------

def _same(S, texts, names):
    expect = parse_system("vars: " + " ".join(names) + "\n" + "".join(f"f: {t}\n" for t in texts))
    return [dict(p.terms) for p in S] == [dict(p.terms) for p in expect]


def test_lk_pk_step_ojika():
    Fx = ojika().swap_vars(0, 1)
    a2 = [F(1), F(-1, 2)]
    P2, L2 = lk_pk_step(Fx, [Fx], [a2], 2)
    assert all(p.is_zero() for p in P2)
    assert _same(L2, ["1 - y2", "(1/4)*y1 - 1/2"], ["y1", "y2"])
    P3, L3 = lk_pk_step(Fx, [Fx, L2], [a2], 3)
    assert L3 is None
    assert _same(P3, ["1/4", "1/8"], ["y1", "y2"])


def test_lk_pk_step_unit_direction():
    S = mu4()
    _, L2 = lk_pk_step(S, [S], [[F(1), F(0)]], 2)
    assert [p for p in L2] == [p.diff(0) for p in S]


# -- msb1 --------------------------------------------------------------------------------------

def test_msb1_ojika_exact():
    ms = msb1(ojika(), [1, 2], exact=True)
    assert (ms.mu, ms.t) == (3, 1)
    assert list(ms.a_vecs[0]) == [1, F(-1, 2)]
    assert list(ms.a_vecs[1]) == [0, F(-1, 8)]


def test_msb1_ojika_float():
    ms = msb1(ojika(), [1.0, 2.0])
    assert (ms.mu, ms.t) == (3, 1)
    assert np.allclose(ms.a_vecs[1], [0.0, -0.125], atol=1e-14)


@pytest.mark.parametrize("family,s,mu", [(cubic_chain, 2, 4), (quadratic_chain, 3, 3),
                                         (cubic_chain, 1, 2), (cubic_chain, 4, 16)])
def test_msb1_chains(family, s, mu):
    assert msb1(family(s), [0] * s, exact=True).mu == mu
    assert msb1(family(s), [0.0] * s).mu == mu


def test_msb1_regular_and_errors():
    assert msb1(parse_system("vars: x y\nf: x-1\nf: y+x"), [1.0, -1.0]).mu == 1
    with pytest.raises(BreadthNotOne):
        msb1(parse_system("vars: x y z\nf: x^2\nf: y^2\nf: z"), [0.0, 0.0, 0.0])
    with pytest.raises(ZeroMatrix):
        msb1(parse_system("vars: x y\nf: x^2\nf: y^2"), [0.0, 0.0])
    with pytest.raises(MultiplicityCapExceeded):
        msb1(cubic_chain(3), [0, 0, 0], exact=True, max_mu=5)


def test_msb1_complex_point():
    # (x^2 + 1)^2 has a double root at x = i
    S = parse_system("vars: x y\nf: x^4 + 2*x^2 + 1\nf: y - x")
    ms = msb1(S, [1j, 1j])
    assert ms.mu == 2
    assert np.iscomplexobj(ms.a_vecs[0])


# -- basis and invariants ------------------------------------------------------------------------

def test_basis_ojika_exact():
    b = construct_dual_basis(msb1(ojika(), [1, 2], exact=True))
    assert b[0] == DiffFunctional.one(2)
    assert b[1] == D(((1, 0), F(-1, 2)), ((0, 1), 1))
    assert b[2] == D(((2, 0), F(1, 4)), ((1, 1), F(-1, 2)), ((0, 2), 1), ((1, 0), F(-1, 8)))


def test_basis_small_cases():
    b = construct_dual_basis(msb1(parse_system("vars: x y\nf: x-1\nf: y"), [1, 0], exact=True))
    assert len(b) == 1 and b[0] == DiffFunctional.one(2)
    b = construct_dual_basis(msb1(parse_system("vars: x1\nf: x1^2"), [0], exact=True))
    assert [l for l in b] == [DiffFunctional.one(1), DiffFunctional.d(1)]


def test_invariants_examples_exact_and_float():
    for S, x in [(ojika(), [1, 2]), (mu4(), [0, 0]), (cubic_chain(3), [0, 0, 0]),
                 (quadratic_chain(5), [0] * 5)]:
        assert check_invariants(S, x, msb1(S, x, exact=True)) == 0.0
        xf = [float(v) for v in x]
        assert check_invariants(S, xf, msb1(S, xf)) <= 1e-10


def test_breadth_one_criterion_diagnostics():
    ms = msb1(quadratic_chain(6), [0.0] * 6)
    s_hi, s_lo = ms.diagnostics["sigma_tilde"]
    a_hi, a_lo = ms.diagnostics["sigma_augmented"]
    assert s_lo > 1e-8 * s_hi and a_lo > 1e-8 * a_hi
    ms = msb1(ojika(), [1, 2], exact=True)
    assert ms.diagnostics["rank_tilde"] == 1 and ms.diagnostics["rank_augmented"] == 2


def _delta_matches_P(S, x, ms):
    """P_k(F)(x) against Delta_k applied to F, with Delta_k from the derivative form."""
    lams = list(construct_dual_basis(ms).exchanged)
    Fx = S.swap_vars(0, ms.t)
    xs = list(x)
    xs[0], xs[ms.t] = xs[ms.t], xs[0]
    worst = 0
    for k in range(3, ms.mu + 2):
        delta = delta_oracle(lams, ms.a_vecs, k)
        if k <= ms.mu:
            # Lambda_k = Delta_k + sum_{j>=2} a_{k,j} d_j
            n = ms.nvars
            rest = lams[k - 1] - delta
            unit = DiffFunctional(n, {tuple(int(i == j) for i in range(n)): ms.a_vecs[k - 2][j] for j in range(1, n)})
            worst = max(worst, rest.max_abs_diff(unit) if not ms.exact else (0 if rest == unit else 1))
        P = ms.P_system(k)
        for f, p in zip(Fx, P):
            diff = apply_functional(delta, f, xs) - eval_poly(p, xs)
            worst = max(worst, abs(diff))
    return worst


def test_P_equals_delta_functional_exact():
    for S, x in [(ojika(), [1, 2]), (mu4(), [0, 0]), (cubic_chain(2), [0, 0]), (quadratic_chain(4), [0] * 4)]:
        assert _delta_matches_P(S, x, msb1(S, x, exact=True)) == 0


def test_P_equals_delta_functional_random():
    rng = random.Random(17)
    for _ in range(25):
        n, mu = rng.randint(1, 3), rng.randint(2, 6)
        S = random_breadth_one(rng, n, mu)
        ms = msb1(S, [0] * n, exact=True)
        assert ms.mu == mu
        assert _delta_matches_P(S, [0] * n, ms) == 0


def test_macaulay_oracle_sample():
    """A quick slice of the 200-instance acceptance check."""
    rng = random.Random(99)
    for _ in range(30):
        n, mu = rng.randint(1, 4), rng.randint(1, 8)
        S = random_breadth_one(rng, n, mu)
        assert macaulay_multiplicity(S) == mu
        assert msb1(S, [0.0] * n, max_mu=64).mu == mu


def test_macaulay_oracle_known_systems():
    assert macaulay_multiplicity(cubic_chain(3)) == 8
    assert macaulay_multiplicity(quadratic_chain(4)) == 3
    assert macaulay_multiplicity(mu4()) == 4
