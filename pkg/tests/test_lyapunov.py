import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isskit import comparison as cf
from isskit import lyapunov as ly
from isskit import probe
from isskit.dynamics import InputSignal
from isskit.reports import FALSIFIED, NO_COUNTEREXAMPLE
from isskit.systems import line_network, linear_decay, two_system, unstable_linear
from isskit.witness import replay_witness

HALF_SQUARE = cf.power(0.5, 2.0)


def young_certificate():
    # V = x^2/2: dV = -x^2 + x u <= -x^2/2 + u^2/2 = -V + u^2/2
    return ly.DissipativeCertificate(ly.quadratic(), HALF_SQUARE, HALF_SQUARE, cf.IDENTITY,
                                     HALF_SQUARE)


def line_certificate(gij=0.6, giu=5.0, alpha=0.1):
    return ly.ImplicationCertificate(ly.abs_norm("max"), cf.IDENTITY, cf.IDENTITY,
                                     cf.linear(gij), cf.linear(giu), cf.linear(alpha))


def test_dini_analytic_values():
    sys = linear_decay()
    V = ly.quadratic()
    assert ly.dini_derivative(sys, V, [2.0]) == pytest.approx(-4.0, rel=1e-8)
    assert ly.dini_derivative(sys, V, [1.0], InputSignal.constant([1.0])) == pytest.approx(0.0, abs=1e-8)
    assert ly.dini_derivative(sys, ly.abs_norm(), [1.0]) == pytest.approx(-1.0, rel=1e-8)


def test_dini_at_kink_of_abs():
    # V = |x| at x = 0 under x' = -x + u with u = 1: D+V = 1
    d = ly.dini_derivative(linear_decay(), ly.abs_norm(), [0.0], InputSignal.constant([1.0]))
    assert d == pytest.approx(1.0, rel=1e-6)


def test_dini_gradient_mismatch_warns():
    bad = ly.LyapunovFn(lambda x: 0.5 * float(x @ x), lambda x: 3 * x, {"name": "bad"})
    with pytest.warns(ly.DiniMismatchWarning):
        ly.dini_derivative(linear_decay(), bad, [1.0])


def test_dini_needs_small_steps():
    with pytest.raises(ValueError):
        ly.dini_derivative(linear_decay(), ly.quadratic(), [1.0], h_seq=(1e-1, 1e-2))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=30, deadline=None)
def test_dini_matches_gradient_two_system(a, b, u1, u2):
    sys = two_system()
    P = np.array([[2.0, 0.5], [0.5, 1.0]])
    V = ly.quadratic(0.5, P)
    x = np.array([a, b])
    u = np.array([u1, u2])
    exact = float(V.grad(x) @ sys.rhs(x, u))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = ly.dini_derivative(sys, V, x, InputSignal.constant(u))
    # at x = 0 the exact value is 0 and the quotients carry an O(h) residue
    assert d == pytest.approx(exact, rel=1e-4, abs=1e-8)


def test_certificate_json_round_trip():
    c = young_certificate()
    back = ly.DissipativeCertificate.from_json(c.to_json())
    assert back.to_json() == c.to_json()
    ic = line_certificate()
    assert ly.ImplicationCertificate.from_json(ic.to_json()).to_json() == ic.to_json()


def test_polynomial_lyapunov_gradient():
    V = ly.polynomial([{"coef": 1.0, "x": [2, 0]}, {"coef": 3.0, "x": [1, 1]}])
    x = np.array([2.0, -1.0])
    assert V(x) == pytest.approx(4 - 6)
    np.testing.assert_allclose(V.grad(x), [2 * 2 + 3 * -1, 3 * 2])


def test_check_dissipative_passes_young():
    rep = ly.check_dissipative(linear_decay(), young_certificate())
    assert rep.verdict == NO_COUNTEREXAMPLE


def test_check_dissipative_falsified_unstable():
    rep = ly.check_dissipative(unstable_linear(), young_certificate())
    assert rep.verdict == FALSIFIED
    assert rep.witness["failed_part"] == "decay"
    assert replay_witness(rep.witness).confirmed


def test_check_dissipative_sandwich_violation():
    c = young_certificate()
    bad = ly.DissipativeCertificate(c.V, cf.IDENTITY, c.psi2, c.alpha, c.xi)
    rep = ly.check_dissipative(linear_decay(), bad)
    assert rep.witness["failed_part"] == "sandwich"
    assert replay_witness(rep.witness).confirmed


def test_implication_line_network():
    sub = line_network(10, 0.4).subsystem(4)
    rep = ly.check_implication(sub, line_certificate(), n_samples=400)
    assert rep.verdict == NO_COUNTEREXAMPLE
    assert rep.details["premise_fraction"] > 0.01


def test_implication_too_fast_decay_falsified():
    sub = line_network(10, 0.4).subsystem(4)
    rep = ly.check_implication(sub, line_certificate(alpha=10.0), n_samples=400)
    assert rep.falsified
    assert replay_witness(rep.witness).confirmed


def test_implication_vacuous_warns():
    sub = line_network(10, 0.4).subsystem(0)
    with pytest.warns(UserWarning):
        rep = ly.check_implication(sub, line_certificate(1e9, 1e9), n_samples=200)
    assert rep.details["vacuous"]


def test_fit_iss_estimate_holds():
    est = ly.fit_iss_estimate(young_certificate())
    assert est.beta(1.0, 0.0) == pytest.approx(1.0)
    b = probe.SamplingBudget(n_samples=60, horizon=20.0)
    assert probe.check_iss_estimate(linear_decay(), est, b).verdict == NO_COUNTEREXAMPLE
