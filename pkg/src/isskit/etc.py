"""Event-triggered sample-and-hold control.

The control ``u = k(x(t_k))`` is held between events.  An event fires when
the hold error ``e = x(t_k) - x(t)`` satisfies
``xi(|e|) >= sigma * alpha(|x|)``, with ``alpha`` and ``xi`` taken from a
dissipative certificate of the closed loop written in ``(x, e)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import comparison as cf
from .dynamics import (DEFAULT_ABS_TOL, DEFAULT_BLOWUP, COMPLETE, ESCAPED, STEP_FAILURE,
                       DP54Stepper, SystemModel, Trajectory, dense_eval, vector_norm)
from .lyapunov import DissipativeCertificate
from .reports import FALSIFIED, NO_COUNTEREXAMPLE, ProbeReport

__all__ = [
    "Feedback", "linear_feedback", "zero_feedback", "feedback_from_json",
    "ETCSetup", "ETCTrace", "setup_from_json", "simulate_etc", "verify_decay",
    "min_interevent_over_set",
    "EVENT_TIME_TOL", "ZENO_MAX_EVENTS", "ZENO_MIN_GAP", "DEGENERATE_STATE",
]

EVENT_TIME_TOL = 1e-10
ZENO_MAX_EVENTS = 100_000
ZENO_MIN_GAP = 1e-9
DEGENERATE_STATE = 1e-12
# trigger samples per accepted step, besides the step end
_PROBE_POINTS = np.linspace(0.0, 1.0, 9)[1:]


@dataclass(frozen=True, eq=False)
class Feedback:
    """State feedback ``u = k(x)`` with its JSON form."""

    fn: Callable
    input_dim: int
    spec: dict

    def __call__(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.fn(np.asarray(x, float)), float))

    def to_json(self) -> dict:
        return self.spec


def linear_feedback(K) -> Feedback:
    """``u = K x``."""
    K = np.atleast_2d(np.asarray(K, float))
    return Feedback(lambda x: K @ x, K.shape[0], {"linear": K.tolist()})


def zero_feedback(input_dim: int = 1) -> Feedback:
    return Feedback(lambda x: np.zeros(input_dim), input_dim, {"name": "zero", "input_dim": input_dim})


def feedback_from_json(d: dict) -> Feedback:
    if "linear" in d:
        return linear_feedback(d["linear"])
    if d.get("name") == "zero":
        return zero_feedback(d.get("input_dim", 1))
    raise KeyError(f"unknown feedback {d!r}")


@dataclass(frozen=True)
class ETCSetup:
    """Plant, feedback, certificate and trigger parameter ``0 < sigma < 1``.

    In ``cert`` the functions ``alpha`` and ``xi`` act on ``|x|`` and ``|e|``
    (not on ``V``): the closed loop is assumed to satisfy
    ``grad V(x) . f(x, k(x + e)) <= -alpha(|x|) + xi(|e|)``.
    """

    plant: SystemModel
    feedback: Feedback
    cert: DissipativeCertificate
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if self.feedback.input_dim != self.plant.input_dim:
            raise ValueError("feedback output does not match the plant input dimension")

    def trigger(self, x, xk) -> float:
        """``xi(|x_k - x|) - sigma * alpha(|x|)``; an event fires when this is ``>= 0``."""
        nrm = self.plant.norm
        return (float(self.cert.xi(float(vector_norm(np.asarray(xk) - np.asarray(x), nrm))))
                - self.sigma * float(self.cert.alpha(float(vector_norm(x, nrm)))))

    def hypothesis_notes(self, R: float = 10.0) -> dict:
        """Sampled Lipschitz estimates of ``alpha^-1`` and ``xi`` on ``(0, R]``.

        Local Lipschitz continuity is a hypothesis for a positive minimal
        inter-event time; parametric forms are taken as given and the
        estimates are informational.
        """
        a_inv = cf.inverse(self.cert.alpha)
        top = float(self.cert.alpha(R))
        notes = {"xi_lipschitz": cf.lipschitz_estimate(self.cert.xi, 0.0, R),
                 "alpha_inv_lipschitz": cf.lipschitz_estimate(a_inv, top * 1e-6, top)}
        parametric = {"linear", "power", "saturation", "zero"}
        notes["parametric"] = (self.cert.alpha.form in parametric and self.cert.xi.form in parametric)
        if not notes["parametric"]:
            notes["warning"] = "table or composite comparison functions: Lipschitz constants are sampled only"
        return notes

    def to_json(self) -> dict:
        return {"plant": self.plant.spec, "feedback": self.feedback.to_json(),
                "certificate": self.cert.to_json(), "sigma": self.sigma}


@dataclass
class ETCTrace:
    """Events ``t_0 = 0 < t_1 < ...``, held states, and the closed-loop trajectory."""

    x0: np.ndarray
    events: np.ndarray
    held: np.ndarray
    trajectory: Trajectory
    inter_event_min: float
    zeno_flag: bool
    status: str
    horizon: float

    @property
    def inter_event_times(self) -> np.ndarray:
        return np.diff(self.events)

    def held_state_at(self, ts) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.events, ts, side="right") - 1, 0, len(self.events) - 1)
        return self.held[idx]

    def summary(self) -> dict:
        gaps = self.inter_event_times
        return {"x0": self.x0.tolist(), "status": self.status, "n_events": int(len(self.events)),
                "inter_event_min": self.inter_event_min,
                "inter_event_max": float(gaps.max()) if gaps.size else self.horizon,
                "zeno_flag": self.zeno_flag, "horizon": self.horizon}

    def events_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t_k"] + [f"x_{i + 1}" for i in range(self.held.shape[1])])
            for k, (t, xk) in enumerate(zip(self.events, self.held)):
                w.writerow([k, format(float(t), ".17g")] + [format(float(v), ".17g") for v in xk])


def _locate(fun_g, interval, lo, hi, tol=EVENT_TIME_TOL):
    """Bisect ``g`` on the dense output between ``lo`` (g < 0) and ``hi`` (g >= 0)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fun_g(dense_eval(interval, mid)) >= 0.0:
            hi = mid
        else:
            lo = mid
    return lo


def simulate_etc(setup: ETCSetup, x0, horizon: float, *, rel_tol: float = 1e-10,
                 abs_tol: float = DEFAULT_ABS_TOL * 1e-2, blowup_threshold: float = DEFAULT_BLOWUP,
                 events: list | None = None) -> ETCTrace:
    """Simulate the held-input loop on ``[0, horizon]``.

    Event times are located by bisection on the dense output to
    ``EVENT_TIME_TOL`` and the left end of the final bracket is used, so the
    trigger inequality is never exceeded by more than the location error.
    While ``|x(t_k)| < DEGENERATE_STATE`` the input ``k(0)`` is held and the
    trigger is replaced by ``|x| >= DEGENERATE_STATE``.

    With ``events`` given, the trigger is ignored and the control is
    updated exactly at those times (used to replay stored traces).
    """
    plant, k = setup.plant, setup.feedback
    x = np.atleast_1d(np.asarray(x0, float))
    x0 = x.copy()
    forced = None if events is None else sorted(float(t) for t in events if 0.0 < t < horizon)
    ev_t, ev_x = [0.0], [x.copy()]
    ts, xs, intervals = [0.0], [x.copy()], []
    status, zeno = COMPLETE, False
    t = 0.0
    while t < horizon:
        xk = x.copy()
        degenerate = float(vector_norm(xk, plant.norm)) < DEGENERATE_STATE
        uk = k(np.zeros_like(xk)) if degenerate else k(xk)
        if forced is not None:
            g = None
            t_stop = forced.pop(0) if forced else horizon
        elif degenerate:
            def g(y):
                return float(vector_norm(y, plant.norm)) - DEGENERATE_STATE
            t_stop = horizon
        else:
            def g(y, xk=xk):
                return setup.trigger(y, xk)
            t_stop = horizon
        stepper = DP54Stepper(lambda s, y, uk=uk: plant.rhs(y, uk), t, x, t_stop, rel_tol, abs_tol)
        fired = None
        while True:
            res = stepper.step()
            if res == "underflow":
                big = float(np.max(np.abs(stepper.x))) > blowup_threshold
                status = ESCAPED if big else STEP_FAILURE
                break
            if res == "done":
                break
            iv = stepper.last_interval
            t0, h = iv[0], iv[1]
            if g is not None:
                prev = t0
                for th in _PROBE_POINTS:
                    tt = t0 + th * h
                    if g(dense_eval(iv, tt)) >= 0.0:
                        fired = _locate(g, iv, prev, tt)
                        break
                    prev = tt
            if fired is not None:
                if fired <= t0:
                    fired = t0 + min(EVENT_TIME_TOL, 0.5 * h)
                x = dense_eval(iv, fired)
                ts.append(fired)
                xs.append(x.copy())
                intervals.append(iv)
                break
            ts.append(stepper.t)
            xs.append(stepper.x.copy())
            intervals.append(iv)
        if status != COMPLETE:
            break
        if fired is None:
            x = stepper.x.copy()
            t = stepper.t
            if forced is None or t >= horizon:
                break
        else:
            t = fired
        ev_t.append(t)
        ev_x.append(x.copy())
        gap = ev_t[-1] - ev_t[-2]
        if len(ev_t) > ZENO_MAX_EVENTS or (forced is None and gap < ZENO_MIN_GAP):
            zeno = True
            break
    events_arr = np.array(ev_t)
    gaps = np.diff(events_arr)
    tau = float(gaps.min()) if gaps.size else float(horizon)
    traj = Trajectory(np.array(ts), np.array(xs), status, ts[-1], None, intervals)
    return ETCTrace(x0, events_arr, np.array(ev_x), traj, tau, zeno, status, float(horizon))


def verify_decay(trace: ETCTrace, setup: ETCSetup, *, n_grid: int = 2001, abs_tol: float = 1e-8,
                 rel_tol: float = 1e-6) -> ProbeReport:
    """Replay the trace from its ``x0`` and event list and check both loop inequalities.

    Along a fine grid it checks the trigger rule
    ``xi(|e|) <= sigma * alpha(|x|)`` and the decay
    ``grad V(x) . f(x, k(x_k)) <= -(1 - sigma) * alpha(|x|)``.
    The first violation of either is reported; ``details`` lists both.
    """
    rep = simulate_etc(setup, trace.x0, trace.horizon, events=list(trace.events[1:]))
    tr = rep.trajectory
    ts = np.union1d(tr.t, np.linspace(0.0, tr.t_end, n_grid))
    xs = tr.at(ts)
    held = rep.held_state_at(ts)
    V, nrm = setup.cert.V, setup.plant.norm
    first = {}
    worst_ratio = -math.inf
    for t, x, xk in zip(ts, xs, held):
        degenerate = float(vector_norm(xk, nrm)) < DEGENERATE_STATE
        ax = float(setup.cert.alpha(float(vector_norm(x, nrm))))
        if not degenerate and "trigger" not in first:
            lhs = setup.trigger(x, xk) + setup.sigma * ax
            rhs = setup.sigma * ax
            # event times are located to EVENT_TIME_TOL; allow the matching drift
            tol = abs_tol + rel_tol * abs(rhs)
            if lhs - rhs > tol:
                first["trigger"] = {"t": float(t), "lhs": lhs, "rhs": rhs, "margin": lhs - rhs,
                                    "tolerance": tol}
        gV = V.grad(x)
        if gV is None or "decay" in first:
            continue
        uk = setup.feedback(np.zeros_like(xk) if degenerate else xk)
        lhs = float(gV @ np.atleast_1d(setup.plant.rhs(x, uk)))
        rhs = -(1.0 - setup.sigma) * ax
        tol = abs_tol + rel_tol * abs(rhs)
        if ax > 0:
            worst_ratio = max(worst_ratio, lhs / ax)
        if lhs - rhs > tol:
            first["decay"] = {"t": float(t), "lhs": lhs, "rhs": rhs, "margin": lhs - rhs,
                              "tolerance": tol}
    details = {"violations": first, "max_dV_over_alpha": worst_ratio,
               "required_dV_over_alpha": -(1.0 - setup.sigma)}
    if first:
        key = min(first, key=lambda k: first[k]["t"])
        w = {"kind": "etc", "setup": setup.to_json(), "x0": trace.x0.tolist(),
             "events": trace.events.tolist(), "horizon": trace.horizon, "violated": key,
             **first[key]}
        return ProbeReport("ETC_DECAY", FALSIFIED, len(ts), w, details)
    return ProbeReport("ETC_DECAY", NO_COUNTEREXAMPLE, len(ts), None, details)


@dataclass
class InterEventReport:
    tau_hat: float
    samples: int
    zeno: bool
    argmin_x0: list
    witness: dict | None = field(default=None)

    def to_json(self) -> dict:
        return {"tau_hat": self.tau_hat, "samples": self.samples, "zeno_flag": self.zeno,
                "argmin_x0": self.argmin_x0, "witness": self.witness}


def min_interevent_over_set(setup: ETCSetup, radius: float, n_samples: int = 100,
                            horizon: float = 20.0, seed: int = 0) -> InterEventReport:
    """Smallest inter-event time over ``x0`` sampled uniformly in the ball of ``radius``.

    A trace without any event after ``t_0`` contributes ``horizon``.  A
    Zeno flag on any sample sets ``tau_hat = 0`` and records that ``x0``.
    """
    rng = np.random.default_rng(seed)
    n = setup.plant.state_dim
    best, arg = math.inf, None
    for _ in range(n_samples):
        d = rng.standard_normal(n)
        x0 = radius * rng.random() ** (1.0 / n) * d / float(vector_norm(d, setup.plant.norm))
        tr = simulate_etc(setup, x0, horizon)
        if tr.zeno_flag:
            w = {"kind": "etc_zeno", "setup": setup.to_json(), "x0": x0.tolist(),
                 "horizon": horizon, "n_events": int(len(tr.events))}
            return InterEventReport(0.0, n_samples, True, x0.tolist(), w)
        if tr.inter_event_min < best:
            best, arg = tr.inter_event_min, x0.tolist()
    return InterEventReport(float(best), n_samples, False, arg)


def setup_from_json(d: dict) -> ETCSetup:
    """Inverse of :meth:`ETCSetup.to_json`."""
    from .systems import system_from_json

    return ETCSetup(system_from_json(d["plant"]), feedback_from_json(d["feedback"]),
                    DissipativeCertificate.from_json(d["certificate"]), float(d["sigma"]))
