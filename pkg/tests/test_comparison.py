import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isskit import comparison as cf

coef = st.floats(0.05, 20.0)
expo = st.floats(0.3, 3.0)
arg = st.floats(1e-6, 1e3)


def _table(steps):
    xs = np.cumsum([0.0] + list(steps))
    ys = np.cumsum([0.0] + [s * (1 + i % 3) for i, s in enumerate(steps)])
    return cf.table(list(zip(xs, ys)), slope=1.0)


def _k_functions():
    return st.one_of(
        coef.map(cf.linear),
        st.tuples(coef, expo).map(lambda cp: cf.power(*cp)),
        st.tuples(coef, st.sampled_from([1.0, 1.5, 2.0])).map(lambda cp: cf.saturation(*cp)),
        st.lists(st.floats(0.01, 5.0), min_size=1, max_size=6).map(_table),
        st.tuples(coef, coef).map(lambda ab: cf.id_plus(cf.power(ab[0], 0.5))
                                  if ab[1] > 1 else cf.id_plus(cf.linear(ab[1]))),
    )


def test_linear_and_power_values():
    assert cf.linear(3.0)(2.0) == 6.0
    assert cf.power(2.0, 3.0)(2.0) == pytest.approx(16.0)
    assert cf.ZERO(5.0) == 0.0
    assert cf.IDENTITY(7.5) == 7.5


def test_saturation_is_bounded():
    g = cf.saturation(2.0, 1.0)
    assert g.sup == 2.0
    assert g(1e9) < 2.0
    with pytest.raises(cf.RangeError):
        cf.invert(g, 2.5)


def test_compose_power_closed_form():
    g = cf.compose(cf.power(2.0, 2.0), cf.linear(3.0))
    assert g.form == "power"
    assert g(1.0) == pytest.approx(18.0)


def test_zero_gain_absorbs_composition():
    assert cf.compose(cf.ZERO, cf.linear(2.0)).is_zero
    assert cf.compose(cf.power(1.0, 2.0), cf.ZERO).is_zero


def test_id_plus_linear_collapses():
    g = cf.id_plus(cf.linear(0.25))
    assert g.linear_coefficient == pytest.approx(1.25)


def test_table_inverse_and_extrapolation():
    g = cf.table([(0, 0), (1, 2), (2, 3)], slope=0.5)
    assert g(1.5) == pytest.approx(2.5)
    assert g(4.0) == pytest.approx(4.0)
    assert cf.invert(g, 4.0) == pytest.approx(4.0)
    h = cf.inverse(g)
    assert h(2.5) == pytest.approx(1.5)


def test_class_l_rejected_as_k():
    with pytest.raises(ValueError):
        cf.compose(cf.exp_decay(1.0, 1.0), cf.IDENTITY)


def test_invert_negative_raises():
    with pytest.raises(ValueError):
        cf.invert(cf.IDENTITY, -1.0)


def test_kl_product_and_nested():
    b = cf.kl_product(cf.linear(2.0), cf.exp_decay(1.0, 1.0))
    assert b(1.0, 1.0) == pytest.approx(2 * math.exp(-1))
    n = cf.kl_nested(cf.power(1.0, 2.0), cf.exp_decay(1.0, 1.0))
    assert n(2.0, 0.0) == pytest.approx(4.0)
    assert n(2.0, 1.0) == pytest.approx(4 * math.exp(-2))
    with pytest.raises(ValueError):
        cf.KLFn("product", cf.exp_decay(1.0, 1.0), cf.IDENTITY)


def test_rational_decay():
    d = cf.rational_decay(2.0, 0.5)
    assert d(3.0) == pytest.approx(1.0)


@given(_k_functions())
@settings(max_examples=50, deadline=None)
def test_json_round_trip(g):
    back = cf.from_json(json.loads(json.dumps(g.to_json())))
    s = np.geomspace(1e-3, 1e2, 17)
    np.testing.assert_allclose(back(s), g(s), rtol=1e-14)


def test_callable_not_serializable():
    g = cf.from_callable(lambda s: s)
    with pytest.raises(TypeError):
        g.to_json()


@given(_k_functions(), arg)
@settings(max_examples=200, deadline=None)
def test_invert_round_trip(g, s):
    r = float(g(s))
    if r >= g.sup or r == 0.0:
        return
    assert cf.invert(g, r) == pytest.approx(s, rel=1e-8)


@given(_k_functions(), _k_functions(), arg, arg)
@settings(max_examples=200, deadline=None)
def test_composition_strictly_monotone(f, g, a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    h = cf.compose(f, g)
    if float(h(hi)) == float(h(lo)):
        # saturated beyond floating-point resolution
        assert float(f(float(g(hi)))) >= float(f.sup) * (1 - 1e-15)
        return
    assert float(h(lo)) < float(h(hi))


def test_lipschitz_estimate_linear():
    assert cf.lipschitz_estimate(cf.linear(3.0), 0.0, 1.0) == pytest.approx(3.0)
