"""ODE systems with external inputs and an adaptive Dormand-Prince integrator.

Inputs are piecewise right-continuous: integration is restarted exactly at
every input breakpoint, so no step straddles a discontinuity of ``u``.
Blow-up is declared only when the state norm has crossed the threshold
*and* the step-size controller has collapsed; a collapse without blow-up is
reported as a step failure (usually stiffness).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

__all__ = [
    "SystemModel", "InputSignal", "Trajectory", "integrate",
    "reachability_bound", "check_lipschitz", "vector_norm",
    "COMPLETE", "ESCAPED", "STEP_FAILURE",
]

COMPLETE, ESCAPED, STEP_FAILURE = "complete", "escaped", "step_failure"

DEFAULT_REL_TOL = 1e-8
DEFAULT_ABS_TOL = 1e-10
DEFAULT_BLOWUP = 1e12
UNDERFLOW_FACTOR = 1e-14
MAX_STEPS = 1_000_000


def vector_norm(x, kind: str = "euclidean", axis=-1):
    """Euclidean or max norm along ``axis``."""
    x = np.asarray(x, dtype=float)
    if kind == "max":
        return np.max(np.abs(x), axis=axis) if x.size else 0.0
    return np.sqrt(np.sum(x * x, axis=axis))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Right-hand side ``f(x, u)`` of ``x' = f(x, u)``.

    ``norm`` selects the norm used on states and input values by the probes
    (``"euclidean"``, or ``"max"`` for networks).  ``spec`` is the JSON
    description the model was built from, when there is one; it makes
    witnesses replayable from the command line.
    """

    state_dim: int
    input_dim: int
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_hint: Callable[[float], float] | None = None
    name: str = ""
    norm: str = "euclidean"
    spec: dict | None = None

    def __post_init__(self):
        if self.state_dim < 1 or self.input_dim < 1:
            raise ValueError("state and input dimensions must be positive")
        if self.norm not in ("euclidean", "max"):
            raise ValueError(f"unknown norm {self.norm!r}")

    def __call__(self, x, u):
        return np.asarray(self.rhs(np.asarray(x, float), np.asarray(u, float)), float)

    def state_norm(self, x, axis=-1):
        return vector_norm(x, self.norm, axis)


def check_lipschitz(sys: SystemModel, C: float, n: int = 2000, seed: int = 0) -> tuple[bool, float]:
    """Sample the bounded-set Lipschitz inequality against ``sys.lipschitz_hint``.

    Returns ``(holds, worst_ratio)`` where ``worst_ratio`` is the largest
    observed ``|f(y,v)-f(x,v)| / |y-x|`` on the ball of radius ``C``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = _ball_point(rng, sys.state_dim, C)
        y = _ball_point(rng, sys.state_dim, C)
        v = _ball_point(rng, sys.input_dim, C)
        d = np.linalg.norm(y - x)
        if d == 0:
            continue
        worst = max(worst, float(np.linalg.norm(sys(y, v) - sys(x, v)) / d))
    if sys.lipschitz_hint is None:
        return True, worst
    return worst <= sys.lipschitz_hint(C) * (1 + 1e-9), worst


def _ball_point(rng, n, radius, on_sphere=False):
    d = rng.standard_normal(n)
    nd = np.linalg.norm(d)
    d = d / nd if nd > 0 else np.eye(n)[0]
    rad = radius if on_sphere else radius * rng.random() ** (1.0 / n)
    return rad * d


# -- inputs ------------------------------------------------------------------

class InputSignal:
    """Piecewise right-continuous input ``u: [0, inf) -> R^m``.

    Piece ``k`` is active on ``[breakpoints[k], breakpoints[k+1])`` and is
    either a constant vector or a continuous callable ``t -> R^m``.  Sup-norms
    of constant pieces are exact; callable pieces are sampled (or use the
    ``bound`` supplied at construction).
    """

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence, dim: int | None = None,
                 bound: float | None = None, samples_per_piece: int = 257):
        bps = [float(b) for b in breakpoints]
        if not bps or bps[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pieces) != len(bps):
            raise ValueError("need one piece per breakpoint")
        self.breakpoints = tuple(bps)
        self._pieces = []
        self._const = []
        for p in pieces:
            if callable(p):
                self._pieces.append(p)
                self._const.append(None)
            else:
                v = np.atleast_1d(np.asarray(p, dtype=float))
                self._pieces.append(v)
                self._const.append(v)
        if dim is None:
            first = self._const[0] if self._const[0] is not None else np.atleast_1d(self._pieces[0](0.0))
            dim = len(first)
        self.dim = int(dim)
        self._bound = bound
        self._n_samp = samples_per_piece

    # constructors
    @classmethod
    def zero(cls, dim: int = 1) -> InputSignal:
        return cls([0.0], [np.zeros(dim)])

    @classmethod
    def constant(cls, value) -> InputSignal:
        return cls([0.0], [np.atleast_1d(np.asarray(value, float))])

    @classmethod
    def piecewise_constant(cls, breakpoints, values) -> InputSignal:
        return cls(breakpoints, [np.atleast_1d(np.asarray(v, float)) for v in values])

    @classmethod
    def from_function(cls, fn: Callable[[float], Any], breakpoints=(0.0,), bound: float | None = None):
        """One continuous callable reused on every piece between the given breakpoints."""
        return cls(breakpoints, [fn] * len(breakpoints), bound=bound)

    @property
    def is_piecewise_constant(self) -> bool:
        return all(c is not None for c in self._const)

    def piece_index(self, t: float) -> int:
        return int(np.searchsorted(self.breakpoints, t, side="right")) - 1

    def piece(self, k: int) -> Callable[[float], np.ndarray]:
        """Continuous extension of piece ``k`` (closed on both ends)."""
        c = self._const[k]
        if c is not None:
            return lambda t, c=c: c
        fn = self._pieces[k]
        return lambda t, fn=fn: np.atleast_1d(np.asarray(fn(t), float))

    def __call__(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("inputs are defined for t >= 0")
        return self.piece(self.piece_index(t))(t)

    def sup_norm(self, a: float = 0.0, b: float = math.inf, norm: str = "euclidean") -> float:
        """``||u||_[a,b]``; ``b = inf`` gives the global sup-norm."""
        if b < a:
            raise ValueError("empty interval")
        best = 0.0
        bps = self.breakpoints
        for k in range(len(bps)):
            lo = bps[k]
            hi = bps[k + 1] if k + 1 < len(bps) else math.inf
            # piece k is active on [lo, hi); [a, b] meets it iff lo <= b and hi > a
            if lo > b or hi <= a:
                continue
            c = self._const[k]
            if c is not None:
                best = max(best, float(vector_norm(c, norm)))
                continue
            s, e = max(a, lo), min(b, hi)
            if math.isinf(e):
                if self._bound is not None:
                    return max(best, self._bound)
                e = s + 100.0
            ts = np.linspace(s, e, self._n_samp)
            if hi < math.inf and e == hi:
                ts = ts[:-1] if len(ts) > 1 else ts
            vals = np.array([np.atleast_1d(self._pieces[k](t)) for t in ts], float)
            best = max(best, float(np.max(vector_norm(vals, norm))))
        return best

    def restricted_breakpoints(self, horizon: float) -> list[float]:
        return [b for b in self.breakpoints if b < horizon]

    def to_json(self) -> dict[str, Any]:
        if not self.is_piecewise_constant:
            raise TypeError("only piecewise-constant inputs serialize to JSON")
        return {"breakpoints": list(self.breakpoints),
                "values": [c.tolist() for c in self._const]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> InputSignal:
        return cls.piecewise_constant(d["breakpoints"], d["values"])

    def __repr__(self) -> str:
        return f"InputSignal(pieces={len(self.breakpoints)}, dim={self.dim})"


# -- Dormand-Prince 5(4) -----------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 5th-order solution minus embedded 4th-order solution, per stage (7 stages, FSAL)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Shampine's free 4th-order continuous extension: y(t0 + th*h) = y0 + h * K^T P [th, th^2, th^3, th^4]
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class DP54Stepper:
    """Adaptive Dormand-Prince stepper for ``x' = fun(t, x)`` on ``[t, t_bound]``.

    ``step()`` advances by one accepted step and returns ``"ok"``, ``"done"``
    (bound reached) or ``"underflow"`` (the controller proposed a step below
    ``1e-14 * t``).  After each accepted step ``last_interval`` holds the
    data needed for dense output on that step.
    """

    def __init__(self, fun, t0, x0, t_bound, rel_tol, abs_tol, max_step=math.inf,
                 first_step=None):
        self.fun = fun
        self.t = float(t0)
        self.x = np.array(x0, dtype=float)
        self.t_bound = float(t_bound)
        self.rtol, self.atol = rel_tol, abs_tol
        self.max_step = max_step
        self.f = np.asarray(fun(self.t, self.x), dtype=float)
        self.n = self.x.size
        self.K = np.empty((7, self.n))
        self.last_interval = None
        self.h = first_step if first_step else self._initial_step()
        self.n_steps = 0

    def _initial_step(self) -> float:
        span = self.t_bound - self.t
        if span <= 0:
            return 0.0
        scale = self.atol + np.abs(self.x) * self.rtol
        d0 = _rms(self.x / scale)
        d1 = _rms(self.f / scale)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, span)
        x1 = self.x + h0 * self.f
        f1 = np.asarray(self.fun(self.t + h0, x1), dtype=float)
        if not np.all(np.isfinite(f1)):
            return h0 * 1e-3
        d2 = _rms((f1 - self.f) / scale) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span, self.max_step)

    def min_step(self) -> float:
        return UNDERFLOW_FACTOR * max(abs(self.t), 1e-8)

    def step(self) -> str:
        if self.t >= self.t_bound:
            return "done"
        t, x, f, K = self.t, self.x, self.f, self.K
        h = min(self.h, self.max_step)
        while True:
            span = self.t_bound - t
            last = t + 1.0001 * h >= self.t_bound
            if last:
                h = span
            elif h < self.min_step():
                self.h = h
                return "underflow"
            K[0] = f
            ok = True
            for s in range(1, 6):
                xs = x + h * (_A[s] @ K[:s])
                K[s] = self.fun(t + _C[s] * h, xs)
            x_new = x + h * (_B @ K[:6])
            f_new = np.asarray(self.fun(t + h, x_new), dtype=float) if np.all(np.isfinite(x_new)) else None
            if f_new is None or not np.all(np.isfinite(f_new)) or not np.all(np.isfinite(K[:6])):
                ok = False
            if ok:
                K[6] = f_new
                scale = self.atol + self.rtol * np.maximum(np.abs(x), np.abs(x_new))
                err = _rms(h * (_E @ K) / scale)
                if not math.isfinite(err):
                    ok = False
            if not ok:
                h *= 0.25
                continue
            if err <= 1.0:
                t_new = self.t_bound if last else t + h
                factor = 10.0 if err == 0 else min(10.0, 0.9 * err ** -0.2)
                self.last_interval = (t, t_new - t, x.copy(), (K.T @ _P).copy())
                self.t, self.x, self.f = t_new, x_new, f_new
                self.h = h * factor
                self.n_steps += 1
                return "ok"
            h *= max(0.2, 0.9 * err ** -0.2)


def _rms(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean(v * v))) if v.size else 0.0


def dense_eval(interval, ts) -> np.ndarray:
    """Evaluate the continuous extension of one accepted step at times ``ts``."""
    t0, h, x0, Q = interval
    th = (np.asarray(ts, float) - t0) / h
    powers = np.stack([th, th ** 2, th ** 3, th ** 4], axis=-1)
    return x0 + h * powers @ Q.T


# -- trajectories ------------------------------------------------------------

@dataclass
class Trajectory:
    """Accepted integration steps plus dense output between them.

    ``status`` is ``complete`` (horizon reached), ``escaped`` (finite escape,
    ``t_escape`` set) or ``step_failure``.
    """

    t: np.ndarray
    x: np.ndarray
    status: str
    t_end: float
    t_escape: float | None = None
    intervals: list = field(default_factory=list, repr=False)
    n_rhs: int = 0

    @property
    def x_end(self) -> np.ndarray:
        return self.x[-1]

    def at(self, ts) -> np.ndarray:
        """State at times ``ts`` (scalar or array) inside ``[0, t_end]``."""
        scalar = np.ndim(ts) == 0
        ts = np.atleast_1d(np.asarray(ts, float))
        if np.any(ts < self.t[0] - 1e-12) or np.any(ts > self.t[-1] + 1e-12 * max(1.0, self.t[-1])):
            raise ValueError("requested time outside the integrated interval")
        if len(self.t) == 1:
            out = np.repeat(self.x[:1], len(ts), axis=0)
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self.t, ts, side="right") - 1, 0, len(self.t) - 2)
        out = np.empty((len(ts), self.x.shape[1]))
        for k in np.unique(idx):
            sel = idx == k
            iv = self.intervals[k]
            out[sel] = dense_eval(iv, ts[sel])
        exact = np.searchsorted(self.t, ts)
        hit = (exact < len(self.t)) & (self.t[np.minimum(exact, len(self.t) - 1)] == ts)
        out[hit] = self.x[exact[hit]]
        return out[0] if scalar else out

    def grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Union of step times and ``n`` uniform times, with the states there."""
        ts = np.union1d(self.t, np.linspace(self.t[0], self.t[-1], n))
        return ts, self.at(ts)

    def to_csv(self, path, ts=None) -> None:
        """Write columns ``t, x_1..x_n`` (step times unless ``ts`` given)."""
        if ts is None:
            ts, xs = self.t, self.x
        else:
            xs = self.at(ts)
        n = xs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)])
            for t, row in zip(ts, xs):
                w.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in row])


def integrate(sys: SystemModel, x0, u: InputSignal | None = None, horizon: float = 1.0, *,
              rel_tol: float = DEFAULT_REL_TOL, abs_tol: float = DEFAULT_ABS_TOL,
              blowup_threshold: float = DEFAULT_BLOWUP, max_step: float = math.inf) -> Trajectory:
    """Integrate ``x' = f(x, u(t))`` from ``x0`` on ``[0, horizon]``.

    Integration restarts at every input breakpoint inside the horizon.
    Returns an ``escaped`` trajectory when ``|x| > blowup_threshold`` and the
    step size underflows, ``step_failure`` on underflow without blow-up.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sys.state_dim,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({sys.state_dim},)")
    if u is None:
        u = InputSignal.zero(sys.input_dim)
    if u.dim != sys.input_dim:
        raise ValueError(f"input has dimension {u.dim}, system expects {sys.input_dim}")

    bps = u.restricted_breakpoints(horizon) + [float(horizon)]
    ts, xs, intervals = [0.0], [x0.copy()], []
    x = x0.copy()
    status, t_escape, n_rhs = COMPLETE, None, 0
    for k in range(len(bps) - 1):
        a, b = bps[k], bps[k + 1]
        piece = u.piece(u.piece_index(a))
        rhs = sys.rhs
        stepper = DP54Stepper(lambda t, y, piece=piece: rhs(y, piece(t)), a, x, b,
                              rel_tol, abs_tol, max_step)
        while True:
            res = stepper.step()
            if res == "ok":
                ts.append(stepper.t)
                xs.append(stepper.x.copy())
                intervals.append(stepper.last_interval)
                if stepper.n_steps > MAX_STEPS:
                    status = STEP_FAILURE
                    break
                continue
            if res == "underflow":
                big = float(np.max(np.abs(stepper.x))) > blowup_threshold
                status = ESCAPED if big else STEP_FAILURE
                if big:
                    t_escape = stepper.t + stepper.h
                break
            break
        n_rhs += 7 * stepper.n_steps
        x = stepper.x
        if status != COMPLETE:
            break
    return Trajectory(np.array(ts), np.array(xs), status, ts[-1], t_escape, intervals, n_rhs)


# -- reachability ------------------------------------------------------------

def reachability_bound(sys: SystemModel, r: float, samples: int = 200, seed: int = 0, *,
                       max_pieces: int = 8, rel_tol: float = DEFAULT_REL_TOL,
                       abs_tol: float = DEFAULT_ABS_TOL,
                       blowup_threshold: float = DEFAULT_BLOWUP) -> float:
    """Monte-Carlo lower estimate of ``sup |phi(t, x, u)|`` over ``|x| <= r``,
    ``||u|| <= r``, ``t in [0, r]``.

    Inputs are piecewise constant with at most ``max_pieces`` pieces, so the
    result under-approximates the true supremum.  Returns ``inf`` if any
    sampled trajectory escapes.

    Raises
    ------
    RuntimeError
        If an integration ends in a step failure.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    rng = np.random.default_rng(seed)
    n, m = sys.state_dim, sys.input_dim
    cases = []
    # deterministic extremes first: axis-aligned states with aligned/opposed constant inputs
    for i in range(n):
        for sgn in (1.0, -1.0):
            x0 = np.zeros(n)
            x0[i] = sgn * r
            for us in (0.0, 1.0, -1.0):
                uv = np.zeros(m)
                uv[min(i, m - 1)] = us * sgn * r
                cases.append((x0, InputSignal.constant(uv)))
    while len(cases) < samples:
        x0 = _norm_point(rng, n, r, sys.norm, on_sphere=rng.random() < 0.5)
        k = int(rng.integers(1, max_pieces + 1))
        bps = np.concatenate([[0.0], np.sort(rng.uniform(0, r, k - 1))])
        bps = np.unique(bps)
        vals = [_norm_point(rng, m, r, sys.norm, on_sphere=rng.random() < 0.5) for _ in bps]
        cases.append((x0, InputSignal.piecewise_constant(bps, vals)))
    best = 0.0
    for x0, u in cases[:max(samples, 1)]:
        tr = integrate(sys, x0, u, r, rel_tol=rel_tol, abs_tol=abs_tol,
                       blowup_threshold=blowup_threshold)
        if tr.status == ESCAPED:
            return math.inf
        if tr.status == STEP_FAILURE:
            raise RuntimeError(f"step failure at t={tr.t_end:g} from x0={x0.tolist()}")
        _, xs = tr.grid(64)
        best = max(best, float(np.max(sys.state_norm(xs))))
    return best


def _norm_point(rng, n, radius, norm="euclidean", on_sphere=False):
    """Random point with ``norm(p) == radius`` (sphere) or ``<= radius``."""
    d = rng.standard_normal(n)
    nd = float(vector_norm(d, norm))
    d = d / nd if nd > 0 else np.eye(n)[0]
    rad = radius if on_sphere else radius * rng.random() ** (1.0 / n)
    return rad * d
