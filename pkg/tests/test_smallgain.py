import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isskit import comparison as cf
from isskit import lyapunov as ly
from isskit import smallgain as sg
from isskit.reports import HYPOTHESIS_VIOLATION, NO_COUNTEREXAMPLE
from isskit.systems import line_network


def line_certificate(c):
    # implication gains 1.5x the coupling leave room for decay rate 0.1
    return ly.ImplicationCertificate(ly.abs_norm("max"), cf.IDENTITY, cf.IDENTITY,
                                     cf.linear(1.5 * c), cf.linear(5.0), cf.linear(0.1))


def test_sgc2_holds_and_matches_exact():
    res = sg.check_sgc_2(sg.GainMatrix2(cf.linear(0.5), cf.linear(0.5)), cf.linear(0.5))
    assert res.holds and res.exact
    assert res.max_ratio == pytest.approx(0.5625)


def test_sgc2_violation_witness():
    res = sg.check_sgc_2(sg.GainMatrix2(cf.linear(2.0), cf.IDENTITY), cf.linear(0.1))
    assert not res.holds and res.exact is False
    assert res.witness == pytest.approx(1e-6)


def test_sgc2_nonlinear_gains():
    # g12 = s^2, g21 = sqrt(s)/2: the loop s/2 is contractive without rho
    g = sg.GainMatrix2(cf.power(1.0, 2.0), cf.power(0.5, 0.5))
    assert sg.check_sgc_2(g, cf.linear(0.1)).holds
    assert sg.check_sgc_2(g, cf.linear(0.1)).exact is None


def test_rho_must_be_kinf():
    with pytest.raises(ValueError):
        sg.check_sgc_2(sg.GainMatrix2(cf.IDENTITY, cf.IDENTITY), cf.saturation(1.0))


@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_cyclic_and_operator_forms_agree(c12, c21, c):
    G = sg.GainMatrix2(cf.linear(c12), cf.linear(c21))
    rho = cf.linear(c) if c > 0 else cf.linear(1e-3)
    a = sg.check_sgc_2(G, rho)
    b = sg.sgc_operator_form(sg.GainOperator.two(G.g12, G.g21), rho)
    assert a.holds == a.exact == b.holds


def test_gain_operator_apply_line():
    op = sg.GainOperator.line(4, cf.linear(0.5))
    np.testing.assert_allclose(op.apply([1.0, 0.0, 4.0, 0.0]), [0.0, 2.0, 0.0, 2.0])
    ring = sg.GainOperator.ring(4, cf.linear(0.5))
    np.testing.assert_allclose(ring.apply([1.0, 0.0, 0.0, 0.0]), [0.0, 0.5, 0.0, 0.5])
    with pytest.raises(IndexError):
        op.apply([1.0, 2.0])
    with pytest.raises(ValueError):
        op.apply([1.0, -1.0, 0.0, 0.0])


@given(st.lists(st.floats(0, 100), min_size=6, max_size=6),
       st.lists(st.floats(0, 100), min_size=6, max_size=6))
@settings(max_examples=50, deadline=None)
def test_gain_operator_monotone(a, b):
    op = sg.GainOperator.line(6, cf.power(0.3, 1.5))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(op.apply(lo) <= op.apply(hi))


def test_templates_ok():
    assert sg.GainOperator.line(5, cf.linear(0.4)).templates_ok()[0]


def test_synthesis_and_verification_line():
    op = sg.GainOperator.line(20, cf.linear(0.4))
    path = sg.synthesize_decay_path(op)
    v = sg.verify_decay_path(op, path)
    assert v.holds
    back = sg.DecayPath.from_json(path.to_json())
    assert sg.verify_decay_path(op, back).holds


def test_synthesis_nonlinear_gain():
    g = cf.table([(0, 0), (1, 0.2), (2, 1.0)], slope=0.5)
    op = sg.GainOperator.line(8, g)
    path = sg.synthesize_decay_path(op)
    assert sg.verify_decay_path(op, path).holds


def test_synthesis_fails_for_superlinear_gain():
    # 0.3 s^1.2 exceeds s for large s, so no global path exists
    with pytest.raises(sg.SynthesisFailure):
        sg.synthesize_decay_path(sg.GainOperator.line(8, cf.power(0.3, 1.2)))


def test_verify_rejects_bad_path():
    op = sg.GainOperator.line(10, cf.linear(0.9))
    path = sg.DecayPath(cf.linear(0.25), (cf.IDENTITY,) * 10, cf.IDENTITY, cf.IDENTITY)
    v = sg.verify_decay_path(op, path)
    assert not v.holds
    assert v.failure["condition"] == "i"


def test_synthesis_fails_above_unit_gain():
    with pytest.raises(sg.SynthesisFailure) as exc:
        sg.synthesize_decay_path(sg.GainOperator.line(10, cf.linear(1.2)))
    assert "reason" in exc.value.witness


def test_composite_lyapunov_max_over_indices():
    path = sg.DecayPath(cf.linear(0.25), (cf.linear(2.0),) * 3, cf.linear(2.0), cf.linear(2.0))
    V = ly.abs_norm("max")
    assert sg.composite_lyapunov(V, path, np.array([1.0, -4.0, 2.0])) == pytest.approx(2.0)
    batch = sg.composite_lyapunov(V, path, np.array([[1.0, -4.0, 2.0], [0.0, 0.0, 1.0]]))
    np.testing.assert_allclose(batch, [2.0, 0.5])


def test_network_certification_small():
    net = line_network(10, 0.4)
    rep = sg.check_network_iss(net, line_certificate(0.4), None, n_implication=400)
    assert rep.verdict == NO_COUNTEREXAMPLE


def test_network_strong_coupling_is_hypothesis_violation():
    net = line_network(10, 1.2)
    rep = sg.check_network_iss(net, line_certificate(1.2), None, n_implication=200)
    assert rep.verdict == HYPOTHESIS_VIOLATION
