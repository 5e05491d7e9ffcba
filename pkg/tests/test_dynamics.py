import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isskit.dynamics import COMPLETE, ESCAPED, InputSignal, integrate
from isskit.systems import (bernoulli_counterexample, cubic_decay, etc_integrator_plant,
                            line_network, linear_decay, system_from_json)

# 1/x1 = y solves y' = y - 3 exp(-t), y(0) = 1/3, so y = -7/6 e^t + 3/2 e^-t
BERNOULLI_ESCAPE = 0.5 * math.log(9 / 7)


def test_linear_decay_endpoint():
    tr = integrate(linear_decay(), [1.0], horizon=1.0)
    assert tr.status == COMPLETE
    assert abs(tr.x_end[0] - math.exp(-1)) < 1e-6


def test_dense_output_matches_closed_form():
    tr = integrate(linear_decay(), [2.0], horizon=3.0, rel_tol=1e-10, abs_tol=1e-12)
    ts = np.linspace(0, 3, 97)
    np.testing.assert_allclose(tr.at(ts)[:, 0], 2 * np.exp(-ts), atol=1e-9)


def test_piecewise_input_restart():
    # x' = -x + u with u = 1 on [0, 1), 0 afterwards
    u = InputSignal.piecewise_constant([0.0, 1.0], [[1.0], [0.0]])
    tr = integrate(linear_decay(), [0.0], u, horizon=2.0, rel_tol=1e-10, abs_tol=1e-12)
    assert 1.0 in tr.t
    x1 = 1 - math.exp(-1)
    assert tr.at(2.0)[0] == pytest.approx(x1 * math.exp(-1), abs=1e-9)


def test_bernoulli_escape_time():
    tr = integrate(bernoulli_counterexample(), [3.0, 3.0], horizon=5.0)
    assert tr.status == ESCAPED
    assert tr.t_escape == pytest.approx(BERNOULLI_ESCAPE, rel=1e-2)


def test_integrator_plant():
    tr = integrate(etc_integrator_plant(2), [1.0, -1.0], InputSignal.constant([0.5, 0.5]), 2.0)
    np.testing.assert_allclose(tr.x_end, [2.0, 0.0], atol=1e-9)


def test_input_sup_norm():
    u = InputSignal.piecewise_constant([0.0, 1.0, 2.0], [[1.0], [-3.0], [0.5]])
    assert u.sup_norm() == 3.0
    assert u.sup_norm(2.0) == 0.5


def test_input_json_round_trip():
    u = InputSignal.piecewise_constant([0.0, 0.5], [[1.0, 2.0], [3.0, 4.0]])
    v = InputSignal.from_json(u.to_json())
    for t in (0.0, 0.3, 0.5, 7.0):
        np.testing.assert_array_equal(u(t), v(t))


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate(linear_decay(), [1.0], horizon=0.0)
    with pytest.raises(ValueError):
        integrate(linear_decay(), [1.0, 2.0], horizon=1.0)
    with pytest.raises(ValueError):
        integrate(linear_decay(), [1.0], InputSignal.constant([1.0, 1.0]), 1.0)


def test_trajectory_csv(tmp_path):
    tr = integrate(linear_decay(), [1.0], horizon=1.0)
    p = tmp_path / "tr.csv"
    tr.to_csv(p, np.linspace(0, 1, 5))
    rows = p.read_text().splitlines()
    assert rows[0] == "t,x_1"
    assert len(rows) == 6


def test_line_network_max_norm():
    net = line_network(5, 0.4)
    assert net.state_norm(np.array([1.0, -3.0, 0, 0, 0])) == 3.0
    back = system_from_json(net.spec)
    x = np.arange(5.0)
    np.testing.assert_allclose(back.rhs(x, np.zeros(5)), net.rhs(x, np.zeros(5)))


@given(st.floats(-10, 10), st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_linear_decay_with_constant_input(x0, c):
    tr = integrate(linear_decay(), [x0], InputSignal.constant([c]), horizon=2.0)
    exact = c + (x0 - c) * math.exp(-2.0)
    assert tr.x_end[0] == pytest.approx(exact, abs=1e-6 * max(1, abs(x0), abs(c)))


@given(st.floats(0.1, 5.0))
@settings(max_examples=15, deadline=None)
def test_cubic_decay_closed_form(x0):
    tr = integrate(cubic_decay(), [x0], horizon=1.0, rel_tol=1e-10, abs_tol=1e-12)
    assert tr.x_end[0] == pytest.approx(x0 / math.sqrt(1 + 2 * x0 * x0), rel=1e-7)
