import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from isskit import comparison as cf
from isskit import probe
from isskit.reports import FALSIFIED, ProbeReport, decode_float, dumps, jsonable
from isskit.systems import linear_decay
from isskit.witness import StaleWitnessError, replay_witness


@given(st.floats(allow_nan=False))
def test_float_round_trip(v):
    assert decode_float(json.loads(dumps({"v": v}))["v"]) == v


def test_non_finite_encoding():
    d = jsonable({"a": math.inf, "b": -math.inf})
    assert d == {"a": "inf", "b": "-inf"}
    assert decode_float(d["a"]) == math.inf
    assert math.isnan(decode_float(jsonable(math.nan)))


def test_dumps_is_deterministic():
    obj = {"b": [1.0, 2], "a": {"z": 0.1, "y": None, "x": True}}
    assert dumps(obj) == dumps(json.loads(dumps(obj)))


def test_report_flags():
    r = ProbeReport("ISS", FALSIFIED, 3, {"kind": "x"})
    assert r.falsified and not r.passed
    assert r.to_json()["samples_used"] == 3


@pytest.fixture(scope="module")
def bound_witness():
    est = probe.ISSEstimate(cf.kl_product(cf.IDENTITY, cf.exp_decay(1.0, 1.0)), cf.linear(0.5))
    rep = probe.check_iss_estimate(linear_decay(), est, probe.SamplingBudget(n_samples=20))
    return jsonable(rep.witness)


def test_replay_confirms_after_json(bound_witness):
    assert replay_witness(bound_witness).confirmed


def test_tampered_margin_rejected(bound_witness):
    w = dict(bound_witness, margin=bound_witness["margin"] * 1.5 + 1e-3)
    res = replay_witness(w)
    assert not res.confirmed
    assert "does not match" in res.message


def test_tampered_state_not_reproduced(bound_witness):
    w = dict(bound_witness, x0=[0.0])
    w["input"] = {"breakpoints": [0.0], "values": [[0.0]]}
    assert not replay_witness(w).confirmed


def test_stale_schema_and_kind(bound_witness):
    with pytest.raises(StaleWitnessError):
        replay_witness(dict(bound_witness, schema="isskit-witness/0"))
    with pytest.raises(StaleWitnessError):
        replay_witness(dict(bound_witness, kind="mystery"))
    w = dict(bound_witness)
    del w["t"]
    with pytest.raises(StaleWitnessError):
        replay_witness(w)
