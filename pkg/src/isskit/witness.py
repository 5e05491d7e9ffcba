"""Replay of falsification witnesses.

A witness records enough to recompute one violated inequality: the
system, the initial state, the input, the integration settings and the
time of the violation.  Replay recomputes the margin and compares it with
the recorded one, which also catches hand-edited files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import comparison as cf
from .dynamics import ESCAPED, InputSignal, integrate, vector_norm
from .reports import decode_float

__all__ = ["WITNESS_SCHEMA", "ReplayResult", "StaleWitnessError", "replay_witness"]

WITNESS_SCHEMA = "isskit-witness/1"


class StaleWitnessError(ValueError):
    """The witness was written with an unknown schema or lacks required fields."""


@dataclass
class ReplayResult:
    confirmed: bool
    kind: str
    recorded_margin: float
    recomputed_margin: float
    tolerance: float
    message: str = ""

    def to_json(self) -> dict:
        return {"confirmed": self.confirmed, "kind": self.kind,
                "recorded_margin": self.recorded_margin,
                "recomputed_margin": self.recomputed_margin, "tolerance": self.tolerance,
                "message": self.message}


def _f(v) -> float:
    return decode_float(v)


def _system(w):
    from .systems import system_from_json

    if not w.get("system"):
        raise StaleWitnessError("witness has no system description")
    return system_from_json(w["system"])


def _input(w, sys):
    d = w.get("input")
    if d is None:
        raise StaleWitnessError("witness input is not serializable")
    return InputSignal.from_json(d)


def _integrate(w, sys, u, horizon=None):
    opts = w.get("integration", {})
    return integrate(sys, np.asarray(w["x0"], float), u, _f(horizon or opts.get("horizon", w["t"])),
                     rel_tol=_f(opts.get("rel_tol", 1e-8)), abs_tol=_f(opts.get("abs_tol", 1e-10)),
                     blowup_threshold=_f(opts.get("blowup_threshold", 1e12)))


def _judge(kind, recorded, recomputed, tol, strict=True) -> ReplayResult:
    """Confirmed when the violation reproduces and the recorded margin matches to ``2 * tol``.

    Exact (non-sampled) conditions pass ``tol = 0`` and ``strict=False``
    so that a zero margin still counts as a violation.
    """
    tol = float(tol)
    reproduces = recomputed > tol if strict else recomputed >= tol
    matches = abs(recorded - recomputed) <= max(2.0 * tol, 1e-12 * abs(recorded))
    if reproduces and matches:
        msg = "violation reproduced"
    elif not reproduces:
        msg = "violation not reproduced"
    else:
        msg = "recorded margin does not match the recomputed one"
    return ReplayResult(reproduces and matches, kind, recorded, recomputed, tol, msg)


def _replay_bound(w) -> ReplayResult:
    sys = _system(w)
    u = _input(w, sys)
    tr = _integrate(w, sys, u)
    t = _f(w["t"])
    x = tr.at(t)
    lhs = float(sys.state_norm(x))
    r0 = float(sys.state_norm(np.asarray(w["x0"], float)))
    unorm = u.sup_norm(norm=sys.norm)
    b = w["bound"]
    if b is None:
        raise StaleWitnessError("bound has no JSON form")
    if b["type"] == "iss":
        rhs = float(cf.KLFn.from_json(b["beta"])(r0, t)) + float(cf.from_json(b["gamma"])(unorm))
    elif b["type"] == "uls":
        rhs = float(cf.from_json(b["sigma"])(r0)) + float(cf.from_json(b["gamma"])(unorm))
    else:
        raise StaleWitnessError(f"unknown bound type {b['type']!r}")
    return _judge(w["kind"], _f(w["margin"]), lhs - rhs, _f(w["tolerance"]))


def _replay_escape(w) -> ReplayResult:
    sys = _system(w)
    u = _input(w, sys)
    tr = _integrate(w, sys, u)
    rec = _f(w["t_escape"])
    if tr.status != ESCAPED:
        return ReplayResult(False, "escape", math.inf, -math.inf, 0.0, "no escape on replay")
    diff = abs(tr.t_escape - rec)
    ok = diff <= 1e-9 * max(1.0, rec)
    return ReplayResult(ok, "escape", rec, tr.t_escape, 1e-9,
                        "escape reproduced" if ok else "escape time differs from the record")


def _replay_lim(w) -> ReplayResult:
    sys = _system(w)
    u = _input(w, sys)
    tr = _integrate(w, sys, u)
    ts, xs = tr.grid(int(w["integration"].get("grid_points", 401)))
    lhs = float(np.min(sys.state_norm(xs)))
    rhs = float(cf.from_json(w["gamma"])(u.sup_norm(norm=sys.norm)))
    return _judge("lim", _f(w["margin"]), lhs - rhs, _f(w["tolerance"]))


def _replay_dissipative(w) -> ReplayResult:
    from .lyapunov import DissipativeCertificate, dini_derivative

    sys = _system(w)
    cert = DissipativeCertificate.from_json(w["certificate"])
    x = np.asarray(w["x0"], float)
    uval = np.asarray(w["input"], float)
    v = cert.V(x)
    if w["failed_part"] == "sandwich":
        r = float(sys.state_norm(x))
        if w["side"] == "lower":
            m = float(cert.psi1(r)) - v
        else:
            m = v - float(cert.psi2(r))
        return _judge("dissipative", _f(w["margin"]), m, _f(w["tolerance"]))
    d = dini_derivative(sys, cert.V, x, InputSignal.constant(uval), check_gradient=False)
    rhs = -float(cert.alpha(v)) + float(cert.xi(float(vector_norm(uval, sys.norm))))
    return _judge("dissipative", _f(w["margin"]), d - rhs, _f(w["tolerance"]))


def _replay_implication(w) -> ReplayResult:
    from .lyapunov import ImplicationCertificate
    from .systems import system_from_json

    spec = w.get("subsystem")
    if not spec:
        raise StaleWitnessError("implication witness lacks the subsystem description")
    sub = system_from_json(spec["network"]).subsystem(int(spec["index"]))
    cert = ImplicationCertificate.from_json(w["certificate"])
    xi = np.asarray(w["xi"], float)
    xbar = [np.asarray(v, float) for v in w["xbar"]]
    ui = np.asarray(w["ui"], float)
    vi = cert.V(xi)
    levels = [float(cert.neighbor_gain(j)(cert.V(xj))) for j, xj in enumerate(xbar)]
    levels.append(float(cert.gamma_iu(float(np.linalg.norm(ui)))))
    if not vi > max(levels):
        return ReplayResult(False, "implication", _f(w["margin"]), -math.inf, _f(w["tolerance"]),
                            "premise does not hold on replay")
    lhs = float(cert.V.grad(xi) @ np.atleast_1d(sub.rhs(xi, xbar, ui)))
    rhs = -float(cert.alpha_tilde(vi))
    return _judge("implication", _f(w["margin"]), lhs - rhs, _f(w["tolerance"]))


def _replay_etc(w) -> ReplayResult:
    from .etc import setup_from_json, simulate_etc

    setup = setup_from_json(w["setup"])
    tr = simulate_etc(setup, np.asarray(w["x0"], float), _f(w["horizon"]), events=w["events"][1:])
    t = _f(w["t"])
    x = tr.trajectory.at(t)
    xk = tr.held_state_at(np.array([t]))[0]
    ax = float(setup.cert.alpha(float(vector_norm(x, setup.plant.norm))))
    if w["violated"] == "trigger":
        m = setup.trigger(x, xk)
    else:
        uk = setup.feedback(xk)
        m = float(setup.cert.V.grad(x) @ np.atleast_1d(setup.plant.rhs(x, uk))) + (1 - setup.sigma) * ax
    return _judge("etc", _f(w["margin"]), m, _f(w["tolerance"]))


def _replay_zeno(w) -> ReplayResult:
    from .etc import setup_from_json, simulate_etc

    setup = setup_from_json(w["setup"])
    tr = simulate_etc(setup, np.asarray(w["x0"], float), _f(w["horizon"]))
    return ReplayResult(tr.zeno_flag, "etc_zeno", 1.0, float(tr.zeno_flag), 0.0,
                        "zeno flag reproduced" if tr.zeno_flag else "zeno flag not reproduced")


def _replay_network(w) -> ReplayResult:
    from .lyapunov import ImplicationCertificate
    from .smallgain import DecayPath, composite_lyapunov

    sys = _system(w)
    u = _input(w, sys)
    tr = _integrate(w, sys, u)
    cert = ImplicationCertificate.from_json(w["certificate"])
    path = DecayPath.from_json(w["path"])
    v1 = composite_lyapunov(cert.V, path, tr.at(_f(w["t"])))
    v0 = composite_lyapunov(cert.V, path, tr.at(_f(w["t_prev"])))
    if not v0 > _f(w["input_level"]):
        return ReplayResult(False, "network_decay", _f(w["margin"]), -math.inf,
                            _f(w["tolerance"]), "composite value not above the input level")
    return _judge("network_decay", _f(w["margin"]), v1 - v0, _f(w["tolerance"]))


def _replay_sgc2(w) -> ReplayResult:
    g12, g21 = cf.from_json(w["gains"]["g12"]), cf.from_json(w["gains"]["g21"])
    ip = cf.id_plus(cf.from_json(w["rho"]))
    r = _f(w["r"])
    m = float(ip(g12(ip(g21(r))))) - r
    return _judge("sgc2", _f(w["margin"]), m, 0.0, strict=False)


def _replay_sgc_operator(w) -> ReplayResult:
    from .smallgain import GainOperator

    g = GainOperator.two(cf.from_json(w["gains"]["g12"]), cf.from_json(w["gains"]["g21"]))
    ip = cf.id_plus(cf.from_json(w["rho"]))
    s = np.asarray(w["s"], float)
    m = float(np.min(np.asarray(ip(g.apply(s))) - s))
    return _judge("sgc_operator", _f(w["margin"]), m, 0.0, strict=False)


_DISPATCH = {
    "trajectory_bound": _replay_bound,
    "escape": _replay_escape,
    "lim": _replay_lim,
    "dissipative": _replay_dissipative,
    "implication": _replay_implication,
    "etc": _replay_etc,
    "etc_zeno": _replay_zeno,
    "network_decay": _replay_network,
    "sgc2": _replay_sgc2,
    "sgc_operator": _replay_sgc_operator,
}


def replay_witness(w: dict) -> ReplayResult:
    """Recompute the violation recorded in ``w``.

    Raises
    ------
    StaleWitnessError
        For an unknown schema or witness kind, or missing fields.
    """
    if not isinstance(w, dict):
        raise StaleWitnessError("witness must be a JSON object")
    schema = w.get("schema", WITNESS_SCHEMA)
    if schema != WITNESS_SCHEMA:
        raise StaleWitnessError(f"unsupported witness schema {schema!r}")
    fn = _DISPATCH.get(w.get("kind"))
    if fn is None:
        raise StaleWitnessError(f"unknown witness kind {w.get('kind')!r}")
    try:
        return fn(w)
    except KeyError as exc:
        raise StaleWitnessError(f"witness lacks field {exc.args[0]!r}") from None
