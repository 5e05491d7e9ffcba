"""Sampled falsification of ISS and its superposition constituents.

Every probe integrates the system from sampled initial states under sampled
piecewise-constant inputs and evaluates the relevant inequality on the
trajectory grid (step times plus a uniform grid).  Infinite-horizon notions
(limsup, inf over t >= 0) are approximated on ``[0, T]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import comparison as cf
from .comparison import ComparisonFn, KLFn
from .dynamics import (ESCAPED, STEP_FAILURE, InputSignal, SystemModel, Trajectory,
                       integrate, vector_norm)
from .reports import FALSIFIED, INCONCLUSIVE, NO_COUNTEREXAMPLE, ProbeReport

__all__ = [
    "SamplingBudget", "ISSEstimate", "ULIMTable", "AsymptoticGainFalsified",
    "check_iss_estimate", "check_uls", "check_lim", "ulim_times",
    "estimate_asymptotic_gain", "check_forward_completeness", "superposition",
    "sample_cases",
]


@dataclass(frozen=True)
class SamplingBudget:
    """How many trajectories to draw and how to judge them.

    ``n_samples`` is spread evenly over the (initial radius, input
    magnitude) cells.  A violation counts only when it exceeds
    ``abs_tol + rel_tol * |bound|``.
    """

    radii: tuple = (0.1, 1.0, 10.0)
    magnitudes: tuple = (0.0, 0.1, 1.0, 10.0)
    n_samples: int = 1008
    max_pieces: int = 8
    horizon: float = 50.0
    grid_points: int = 401
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    int_rel_tol: float = 1e-8
    int_abs_tol: float = 1e-10
    blowup_threshold: float = 1e12
    seed: int = 0

    def integration(self) -> dict:
        return {"rel_tol": self.int_rel_tol, "abs_tol": self.int_abs_tol,
                "blowup_threshold": self.blowup_threshold, "horizon": self.horizon,
                "grid_points": self.grid_points}

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_json(cls, d: dict) -> SamplingBudget:
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**kw)


@dataclass(frozen=True)
class ISSEstimate:
    """Candidate ``|phi(t,x,u)| <= beta(|x|, t) + gamma(||u||)``."""

    beta: KLFn
    gamma: ComparisonFn

    def bound(self, r, t, unorm):
        return self.beta(r, t) + self.gamma(unorm)

    def to_json(self) -> dict:
        return {"type": "iss", "beta": self.beta.to_json(), "gamma": self.gamma.to_json()}


class AsymptoticGainFalsified(RuntimeError):
    """A sampled trajectory escaped while estimating an asymptotic gain."""

    def __init__(self, witness: dict):
        super().__init__(f"trajectory escaped at t={witness['t_escape']:g}")
        self.witness = witness


# -- sampling ----------------------------------------------------------------

def _point(rng, n, radius, norm, on_sphere):
    d = rng.standard_normal(n)
    nd = float(vector_norm(d, norm))
    d = d / nd if nd > 0 else np.eye(n)[0]
    rad = radius if on_sphere else radius * rng.random() ** (1.0 / n)
    return rad * d


def _axis(n, norm_kind, radius, sign=1.0):
    v = np.zeros(n)
    v[0] = sign * radius
    return v


def sample_cases(sys: SystemModel, radii, magnitudes, n_samples: int, horizon: float,
                 max_pieces: int, rng) -> Iterator[tuple[np.ndarray, InputSignal]]:
    """Yield ``(x0, u)`` pairs cell by cell.

    Each cell starts with three structured cases (state on the first axis
    with an aligned constant input, with an opposed one, and the zero state
    with a constant input); the rest are random states on or inside the
    ball and random piecewise-constant inputs with up to ``max_pieces``
    pieces.
    """
    cells = [(R, M) for R in radii for M in magnitudes]
    per_cell = max(1, math.ceil(n_samples / len(cells)))
    n, m = sys.state_dim, sys.input_dim
    for R, M in cells:
        for k in range(per_cell):
            if k == 0:
                yield _axis(n, sys.norm, R), InputSignal.constant(_axis(m, sys.norm, M))
            elif k == 1:
                yield _axis(n, sys.norm, R), InputSignal.constant(_axis(m, sys.norm, M, -1.0))
            elif k == 2:
                yield np.zeros(n), InputSignal.constant(_axis(m, sys.norm, M))
            else:
                x0 = _point(rng, n, R, sys.norm, on_sphere=bool(k % 2))
                pieces = int(rng.integers(1, max_pieces + 1))
                bps = np.unique(np.concatenate([[0.0], rng.uniform(0.0, horizon, pieces - 1)]))
                vals = [_point(rng, m, M, sys.norm, on_sphere=rng.random() < 0.5) for _ in bps]
                yield x0, InputSignal.piecewise_constant(bps, vals)


def _integrate(sys, x0, u, budget: SamplingBudget, horizon=None) -> Trajectory:
    tr = integrate(sys, x0, u, horizon or budget.horizon, rel_tol=budget.int_rel_tol,
                   abs_tol=budget.int_abs_tol, blowup_threshold=budget.blowup_threshold)
    if tr.status == STEP_FAILURE:
        raise RuntimeError(f"step failure at t={tr.t_end:g} from x0={np.asarray(x0).tolist()}")
    return tr


def _json_or_none(obj):
    try:
        return obj.to_json()
    except (TypeError, AttributeError):
        return None


def _base_witness(kind, prop, sys, x0, u, budget, horizon=None) -> dict:
    integ = budget.integration()
    if horizon is not None:
        integ["horizon"] = horizon
    return {"kind": kind, "property": prop, "system": sys.spec,
            "x0": np.asarray(x0, float).tolist(), "input": _json_or_none(u),
            "integration": integ}


def _escape_witness(prop, sys, x0, u, tr, budget, horizon=None) -> dict:
    w = _base_witness("escape", prop, sys, x0, u, budget, horizon)
    w.update({"t_escape": tr.t_escape, "t": tr.t_escape, "margin": math.inf,
              "state_norm_at_escape": float(np.max(np.abs(tr.x_end)))})
    return w


# -- trajectory bounds (ISS, ULS) --------------------------------------------

def _bound_check(prop, sys, cases, bound_fn, bound_json, budget) -> ProbeReport:
    used = 0
    for x0, u in cases:
        used += 1
        tr = _integrate(sys, x0, u, budget)
        if tr.status == ESCAPED:
            w = _escape_witness(prop, sys, x0, u, tr, budget)
            return ProbeReport(prop, FALSIFIED, used, w, {"failed_constituent": "FC"})
        ts, xs = tr.grid(budget.grid_points)
        lhs = sys.state_norm(xs)
        r0 = float(sys.state_norm(np.asarray(x0, float)))
        unorm = u.sup_norm(norm=sys.norm)
        rhs = np.asarray(bound_fn(r0, ts, unorm), float)
        tol = budget.abs_tol + budget.rel_tol * np.abs(rhs)
        bad = np.nonzero(lhs - rhs > tol)[0]
        if bad.size:
            i = int(bad[0])
            w = _base_witness("trajectory_bound", prop, sys, x0, u, budget)
            w.update({"t": float(ts[i]), "lhs": float(lhs[i]), "rhs": float(rhs[i]),
                      "margin": float(lhs[i] - rhs[i]), "tolerance": float(tol[i]),
                      "bound": bound_json, "state_norm_x0": r0, "input_norm": unorm})
            return ProbeReport(prop, FALSIFIED, used, w)
    return ProbeReport(prop, NO_COUNTEREXAMPLE, used)


def check_iss_estimate(sys: SystemModel, est: ISSEstimate,
                       budget: SamplingBudget = SamplingBudget()) -> ProbeReport:
    """Search for a violation of ``|phi(t,x,u)| <= beta(|x|,t) + gamma(||u||)``.

    An escaping trajectory falsifies forward completeness and hence ISS.
    """
    rng = np.random.default_rng(budget.seed)
    cases = sample_cases(sys, budget.radii, budget.magnitudes, budget.n_samples,
                         budget.horizon, budget.max_pieces, rng)
    return _bound_check("ISS", sys, cases, est.bound, _json_or_none(est), budget)


def check_uls(sys: SystemModel, sigma: ComparisonFn, gamma: ComparisonFn, r: float,
              budget: SamplingBudget = SamplingBudget()) -> ProbeReport:
    """Search for a violation of ``|phi| <= sigma(|x|) + gamma(||u||)`` on ``|x|, ||u|| <= r``."""
    if not r > 0:
        raise ValueError("r must be positive")
    rng = np.random.default_rng(budget.seed)
    mags = tuple(M for M in budget.magnitudes if M <= r) or (0.0,)
    mags = tuple(sorted(set(mags) | {0.0, r}))
    cases = sample_cases(sys, (r, 0.1 * r), mags, budget.n_samples, budget.horizon,
                         budget.max_pieces, rng)

    def bound(r0, ts, unorm):
        return np.full_like(ts, sigma(r0) + gamma(unorm))

    bj = None
    try:
        bj = {"type": "uls", "sigma": sigma.to_json(), "gamma": gamma.to_json()}
    except TypeError:
        pass
    return _bound_check("ULS", sys, cases, bound, bj, budget)


# -- limit properties --------------------------------------------------------

def check_lim(sys: SystemModel, gamma: ComparisonFn,
              budget: SamplingBudget = SamplingBudget()) -> ProbeReport:
    """Search for ``(x, u)`` with ``min_{t in [0,T]} |phi(t,x,u)| > gamma(||u||)``.

    A violation on ``[0, T]`` falsifies LIM only once the trajectory has
    settled: if ``|phi|`` still drops by more than the tolerance over the
    tail window ``[0.8 T, T]`` the infimum may yet fall below the bound, and
    the case is counted in ``details["inconclusive_horizon"]`` instead.
    An escaping trajectory falsifies LIM only if its infimum over the
    existence interval already exceeds the bound; otherwise it is counted
    in ``details["inconclusive_escape"]``.
    """
    rng = np.random.default_rng(budget.seed)
    cases = sample_cases(sys, budget.radii, budget.magnitudes, budget.n_samples,
                         budget.horizon, budget.max_pieces, rng)
    used, inconclusive, unsettled = 0, 0, 0
    for x0, u in cases:
        used += 1
        tr = _integrate(sys, x0, u, budget)
        ts, xs = tr.grid(budget.grid_points)
        lhs = sys.state_norm(xs)
        i = int(np.argmin(lhs))
        unorm = u.sup_norm(norm=sys.norm)
        rhs = gamma(unorm)
        tol = budget.abs_tol + budget.rel_tol * abs(rhs)
        if lhs[i] - rhs > tol and tr.status != ESCAPED:
            tail_drop = float(sys.state_norm(tr.at(0.8 * tr.t_end))) - float(lhs[-1])
            if tail_drop > tol:
                unsettled += 1
                continue
        if lhs[i] - rhs > tol:
            w = _base_witness("lim", "LIM", sys, x0, u, budget)
            w.update({"t": float(ts[i]), "lhs": float(lhs[i]), "rhs": float(rhs),
                      "margin": float(lhs[i] - rhs), "tolerance": float(tol),
                      "gamma": _json_or_none(gamma), "escaped": tr.status == ESCAPED})
            return ProbeReport("LIM", FALSIFIED, used, w)
        if tr.status == ESCAPED:
            inconclusive += 1
    details = {"inconclusive_escape": inconclusive, "inconclusive_horizon": unsettled}
    verdict = NO_COUNTEREXAMPLE if inconclusive == unsettled == 0 else INCONCLUSIVE
    return ProbeReport("LIM", verdict, used, None, details)


@dataclass
class ULIMTable:
    """Empirical ``tau(eps, r)``: worst first time with ``|phi| <= eps + gamma(||u||)``."""

    eps: tuple
    r: tuple
    tau: np.ndarray
    samples: int

    def __call__(self, eps, r) -> float:
        return float(self.tau[self.eps.index(eps), self.r.index(r)])

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.tau)))

    def to_json(self) -> dict:
        return {"eps": list(self.eps), "r": list(self.r), "tau": self.tau.tolist(),
                "samples": self.samples}


def _first_hit(tr: Trajectory, sys, level: float, n_grid: int) -> float:
    ts, xs = tr.grid(n_grid)
    ok = sys.state_norm(xs) <= level
    if not ok.any():
        return math.inf
    j = int(np.argmax(ok))
    if j == 0:
        return 0.0
    lo, hi = ts[j - 1], ts[j]
    while hi - lo > 1e-10 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if sys.state_norm(tr.at(mid)) <= level:
            hi = mid
        else:
            lo = mid
    return float(hi)


def ulim_times(sys: SystemModel, gamma: ComparisonFn, eps_grid=(0.05, 0.1, 0.5),
               r_grid=(0.1, 1.0, 10.0), budget: SamplingBudget = SamplingBudget()) -> ULIMTable:
    """Tabulate the uniform-limit time ``tau(eps, r)`` over ``|x|, ||u|| <= r``."""
    rng = np.random.default_rng(budget.seed)
    eps_grid, r_grid = tuple(eps_grid), tuple(r_grid)
    tau = np.zeros((len(eps_grid), len(r_grid)))
    per_r = max(1, budget.n_samples // max(1, len(r_grid)))
    used = 0
    for jr, r in enumerate(r_grid):
        mags = (0.0, 0.1 * r, r)
        for x0, u in sample_cases(sys, (r, 0.5 * r), mags, per_r, budget.horizon,
                                  budget.max_pieces, rng):
            used += 1
            tr = _integrate(sys, x0, u, budget)
            unorm = u.sup_norm(norm=sys.norm)
            for ie, eps in enumerate(eps_grid):
                # an escaping trajectory that never reaches the level gives inf
                hit = _first_hit(tr, sys, eps + gamma(unorm), budget.grid_points)
                tau[ie, jr] = max(tau[ie, jr], hit)
    return ULIMTable(eps_grid, r_grid, tau, used)


# -- asymptotic gain ---------------------------------------------------------

def estimate_asymptotic_gain(sys: SystemModel, radii,
                             budget: SamplingBudget = SamplingBudget()) -> ComparisonFn:
    """Monotone table estimate of the asymptotic gain.

    For each input magnitude ``r`` the limsup is approximated by the
    largest ``|phi|`` over the tail window ``[0.8 T, T]``, maximized over
    sampled initial states and inputs with ``||u|| <= r``.  The result is
    the nondecreasing envelope through ``(0, 0)``.

    Raises
    ------
    AsymptoticGainFalsified
        If any sampled trajectory escapes.
    """
    rng = np.random.default_rng(budget.seed)
    radii = sorted(float(r) for r in radii if r > 0)
    T = budget.horizon
    per_r = max(1, budget.n_samples // max(1, len(radii)))
    est = []
    for r in radii:
        best = 0.0
        for x0, u in sample_cases(sys, budget.radii, (r,), per_r, T, budget.max_pieces, rng):
            tr = _integrate(sys, x0, u, budget)
            if tr.status == ESCAPED:
                raise AsymptoticGainFalsified(_escape_witness("AG", sys, x0, u, tr, budget))
            ts = np.linspace(0.8 * T, T, budget.grid_points)
            best = max(best, float(np.max(sys.state_norm(tr.at(ts)))))
        est.append(best)
    knots = [(0.0, 0.0)]
    for r, v in zip(radii, est):
        px, py = knots[-1]
        knots.append((r, max(v, py + 2 * cf.MIN_TABLE_SLOPE * (r - px))))
    if len(knots) == 1:
        return cf.ZERO
    (x1, y1), (x2, y2) = knots[-2], knots[-1]
    slope = max((y2 - y1) / (x2 - x1), 2 * cf.MIN_TABLE_SLOPE)
    return cf.table(knots, slope, kind="kinf")


# -- forward completeness and superposition ----------------------------------

def check_forward_completeness(sys: SystemModel,
                               budget: SamplingBudget = SamplingBudget()) -> ProbeReport:
    """Report the first sampled escape; no escape means only "none observed up to the threshold"."""
    rng = np.random.default_rng(budget.seed)
    used = 0
    for x0, u in sample_cases(sys, budget.radii, budget.magnitudes, budget.n_samples,
                              budget.horizon, budget.max_pieces, rng):
        used += 1
        tr = _integrate(sys, x0, u, budget)
        if tr.status == ESCAPED:
            return ProbeReport("FC", FALSIFIED, used,
                               _escape_witness("FC", sys, x0, u, tr, budget))
    return ProbeReport("FC", NO_COUNTEREXAMPLE, used,
                       details={"note": "no escape observed up to the blow-up threshold"})


def superposition(sys: SystemModel, est: ISSEstimate, uls_sigma: ComparisonFn,
                  uls_gamma: ComparisonFn, uls_r: float, lim_gamma: ComparisonFn,
                  budget: SamplingBudget = SamplingBudget()) -> dict:
    """Run the ISS probe and its FC / ULS / LIM constituents on one system.

    ``coherent`` is true when ISS is falsified exactly when one of the
    constituents is.  An ``inconclusive`` constituent counts as not
    falsified, matching the ISS probe, which never reports inconclusive.
    """
    out = {
        "ISS": check_iss_estimate(sys, est, budget),
        "FC": check_forward_completeness(sys, budget),
        "ULS": check_uls(sys, uls_sigma, uls_gamma, uls_r, budget),
        "LIM": check_lim(sys, lim_gamma, budget),
    }
    some_falsified = any(out[p].falsified for p in ("FC", "ULS", "LIM"))
    out["coherent"] = out["ISS"].falsified == some_falsified
    return out
