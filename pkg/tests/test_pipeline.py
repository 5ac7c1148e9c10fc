import numpy as np
import pytest

from breadthone.errors import BreadthNotOne
from breadthone.pipeline import certify, multiplicity_candidates, refine_point
from breadthone.poly import parse_system

from helpers import mu4, sensitive, ojika, quadratic_chain


def test_candidates_largest_first():
    c = multiplicity_candidates(quadratic_chain(10), 1e-4 * np.ones(10))
    mus = [m.mu for m in c]
    assert mus == sorted(mus, reverse=True) and 3 in mus


def test_refine_point_confirms():
    st, ms = refine_point(mu4(), [0.002, 0.003])
    assert st.mu == ms.mu == 4


def test_certify_regular_root():
    r = certify(parse_system("vars: x y\nf: x^2-2\nf: y-x"), [1.4, 1.4])
    assert r.mu == 1 and r.certificate is None
    assert r.regular.box.contains(np.array([np.sqrt(2)] * 2)).all()


@pytest.mark.parametrize("start", [[0.002, 0.001], [0.001, 0.001]])
def test_sensitive_example_stays_at_origin(start):
    r = certify(sensitive(), start)
    c = r.certificate
    assert r.mu == 2 and c.max_width() <= 2e-14
    assert c.X.contains(np.zeros(2)).all()
    assert not (c.X.lo[0] <= 0.5 <= c.X.hi[0])


def test_certify_ojika():
    r = certify(ojika(), [1.0001, 2.0002])
    assert r.mu == 3 and r.certificate.X.contains(np.array([1.0, 2.0])).all()
    assert set(r.timings) == {"refine", "verify"}


def test_breadth_two_reported():
    with pytest.raises(BreadthNotOne):
        certify(parse_system("vars: x y z\nf: x^2\nf: y^2\nf: z"), [0.0, 0.0, 0.0])


def test_breadth_two_off_root_fails_cleanly():
    # off the root the Jacobian looks regular at tol 1e-8; no certificate may result
    from breadthone.errors import VerificationFailure
    with pytest.raises(VerificationFailure):
        certify(parse_system("vars: x y z\nf: x^2\nf: y^2\nf: z"), [1e-3, 1e-3, 0.0])
