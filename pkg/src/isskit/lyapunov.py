"""ISS Lyapunov certificates in dissipative and implication form.

Decay inequalities are checked through an upper Dini derivative computed
from integrated trajectories, so they also apply to nonsmooth ``V``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import comparison as cf
from .comparison import ComparisonFn
from .dynamics import ESCAPED, InputSignal, SystemModel, integrate, vector_norm
from .reports import FALSIFIED, NO_COUNTEREXAMPLE, ProbeReport

__all__ = [
    "LyapunovFn", "quadratic", "abs_norm", "polynomial", "lyapunov_from_json",
    "DissipativeCertificate", "ImplicationCertificate", "DiniMismatchWarning",
    "dini_derivative", "check_dissipative", "check_implication", "fit_iss_estimate",
    "DEFAULT_H_SEQ", "PREMISE_SLACK",
]

DEFAULT_H_SEQ = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
PREMISE_SLACK = 1e-6
GRADIENT_REL_TOL = 1e-4


class DiniMismatchWarning(UserWarning):
    """Numerical Dini derivative and ``grad V . f`` disagree."""


@dataclass(frozen=True, eq=False)
class LyapunovFn:
    """A candidate ``V`` with optional gradient.

    ``spec`` is the JSON form (``{"name": "quadratic", ...}``,
    ``{"name": "abs"}`` or ``{"polynomial": ...}``) used for replay.
    """

    value: Callable
    gradient: Callable | None = None
    spec: dict | None = None

    def __call__(self, x) -> float:
        return float(self.value(np.atleast_1d(np.asarray(x, float))))

    def grad(self, x):
        if self.gradient is None:
            return None
        return np.atleast_1d(np.asarray(self.gradient(np.atleast_1d(np.asarray(x, float))), float))

    def to_json(self):
        return self.spec


def quadratic(weight=0.5, P=None) -> LyapunovFn:
    """``V(x) = weight * x^T P x`` with ``P`` the identity by default."""
    if P is None:
        def value(x):
            return weight * float(x @ x)

        def gradient(x):
            return 2 * weight * x
        spec = {"name": "quadratic", "weight": weight}
    else:
        P = np.asarray(P, float)

        def value(x):
            return weight * float(x @ P @ x)

        def gradient(x):
            return weight * (P + P.T) @ x
        spec = {"name": "quadratic", "weight": weight, "P": P.tolist()}
    return LyapunovFn(value, gradient, spec)


def abs_norm(norm: str = "euclidean") -> LyapunovFn:
    """``V(x) = |x|``; the gradient is undefined at 0."""
    def value(x):
        return float(vector_norm(x, norm))

    def gradient(x):
        n = float(vector_norm(x, norm))
        if n == 0.0:
            return None
        if norm == "euclidean":
            return x / n
        g = np.zeros_like(x)
        k = int(np.argmax(np.abs(x)))
        g[k] = math.copysign(1.0, x[k])
        return g
    return LyapunovFn(value, gradient, {"name": "abs", "norm": norm})


def polynomial(terms: list) -> LyapunovFn:
    """``V(x) = sum coef * prod x_j**e_j`` from ``[{"coef": c, "x": [e...]}, ...]``."""
    coefs = np.array([float(t["coef"]) for t in terms])
    exps = np.array([t["x"] for t in terms], dtype=float)

    def value(x):
        return float(np.sum(coefs * np.prod(x ** exps, axis=1)))

    def gradient(x):
        g = np.zeros(exps.shape[1])
        for j in range(exps.shape[1]):
            e = exps.copy()
            d = e[:, j].copy()
            e[:, j] = np.maximum(d - 1, 0)
            g[j] = float(np.sum(coefs * d * np.prod(x ** e, axis=1)))
        return g
    return LyapunovFn(value, gradient, {"polynomial": terms})


def lyapunov_from_json(d: dict) -> LyapunovFn:
    if "polynomial" in d:
        return polynomial(d["polynomial"])
    name = d.get("name")
    if name == "quadratic":
        return quadratic(d.get("weight", 0.5), d.get("P"))
    if name == "abs":
        return abs_norm(d.get("norm", "euclidean"))
    raise KeyError(f"unknown Lyapunov function {name!r}")


@dataclass(frozen=True)
class DissipativeCertificate:
    """``psi1(|x|) <= V(x) <= psi2(|x|)`` and ``dV <= -alpha(V) + xi(|u|)``."""

    V: LyapunovFn
    psi1: ComparisonFn
    psi2: ComparisonFn
    alpha: ComparisonFn
    xi: ComparisonFn

    def to_json(self) -> dict:
        return {"V": self.V.to_json(), "psi1": self.psi1.to_json(), "psi2": self.psi2.to_json(),
                "alpha": self.alpha.to_json(), "xi": self.xi.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> DissipativeCertificate:
        return cls(lyapunov_from_json(d["V"]), cf.from_json(d["psi1"]), cf.from_json(d["psi2"]),
                   cf.from_json(d["alpha"]), cf.from_json(d["xi"]))


@dataclass(frozen=True)
class ImplicationCertificate:
    """Decay of ``V_i`` wherever it dominates the neighbor and input gain levels.

    ``gamma_ij`` maps a neighbor index (position in the neighbor list) to its
    gain; a single ComparisonFn is used for every neighbor.
    """

    V: LyapunovFn
    psi1: ComparisonFn
    psi2: ComparisonFn
    gamma_ij: ComparisonFn | tuple
    gamma_iu: ComparisonFn
    alpha_tilde: ComparisonFn

    def neighbor_gain(self, k: int) -> ComparisonFn:
        if isinstance(self.gamma_ij, ComparisonFn):
            return self.gamma_ij
        return self.gamma_ij[k]

    def to_json(self) -> dict:
        gij = (self.gamma_ij.to_json() if isinstance(self.gamma_ij, ComparisonFn)
               else [g.to_json() for g in self.gamma_ij])
        return {"V": self.V.to_json(), "psi1": self.psi1.to_json(), "psi2": self.psi2.to_json(),
                "gamma_ij": gij, "gamma_iu": self.gamma_iu.to_json(),
                "alpha_tilde": self.alpha_tilde.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> ImplicationCertificate:
        g = d["gamma_ij"]
        gij = tuple(cf.from_json(x) for x in g) if isinstance(g, list) else cf.from_json(g)
        return cls(lyapunov_from_json(d["V"]), cf.from_json(d["psi1"]), cf.from_json(d["psi2"]),
                   gij, cf.from_json(d["gamma_iu"]), cf.from_json(d["alpha_tilde"]))


# -- Dini derivative ---------------------------------------------------------

def dini_derivative(sys: SystemModel, V: LyapunovFn, x, u: InputSignal | None = None,
                    h_seq=DEFAULT_H_SEQ, *, check_gradient: bool = True) -> float:
    """Upper right Dini derivative of ``V`` along ``phi(., x, u)`` at ``t = 0``.

    Difference quotients are formed for every ``h`` in ``h_seq``; the last
    three are Richardson-extrapolated pairwise (first order in ``h``) and
    the larger of the two extrapolated values is returned.
    """
    x = np.atleast_1d(np.asarray(x, float))
    h_seq = sorted((float(h) for h in h_seq), reverse=True)
    if len(h_seq) < 3 or h_seq[-1] > 1e-6:
        raise ValueError("h_seq needs at least three values and a tail at or below 1e-6")
    u = u if u is not None else InputSignal.zero(sys.input_dim)
    v0 = V(x)
    if not math.isfinite(v0):
        raise ValueError(f"V is not finite at x={x.tolist()}")
    tr = integrate(sys, x, u, h_seq[0], rel_tol=1e-12, abs_tol=1e-14)
    if tr.status == ESCAPED or tr.t_end < h_seq[0]:
        raise ValueError("trajectory does not exist on the probing interval")
    xs = tr.at(np.array(h_seq))
    q = []
    for h, xh in zip(h_seq, xs):
        vh = V(xh)
        if not math.isfinite(vh):
            raise ValueError(f"V is not finite along the probe at h={h:g}")
        q.append((vh - v0) / h)
    (h1, q1), (h2, q2), (h3, q3) = zip(h_seq[-3:], q[-3:])
    r12 = (h1 * q2 - h2 * q1) / (h1 - h2)
    r23 = (h2 * q3 - h3 * q2) / (h2 - h3)
    d = max(r12, r23)
    if check_gradient:
        g = V.grad(x) if V.gradient is not None else None
        if g is not None and np.all(np.isfinite(g)):
            ref = float(g @ np.atleast_1d(sys(x, u(0.0))))
            if abs(d - ref) > GRADIENT_REL_TOL * max(1.0, abs(ref)):
                warnings.warn(f"Dini estimate {d:.10g} differs from grad V . f = {ref:.10g}",
                              DiniMismatchWarning, stacklevel=2)
    return float(d)


def _lie(sys, V, x, uval):
    g = V.grad(x) if V.gradient is not None else None
    if g is None or not np.all(np.isfinite(g)):
        return None
    return float(g @ np.atleast_1d(sys(x, uval)))


def _sample_state(rng, n, radius, norm):
    d = rng.standard_normal(n)
    nd = float(vector_norm(d, norm))
    if nd == 0.0:
        d, nd = np.eye(n)[0], 1.0
    return (radius * rng.random()) * d / nd


# -- dissipative form --------------------------------------------------------

def check_dissipative(sys: SystemModel, cert: DissipativeCertificate, budget=None, *,
                      n_samples: int | None = None, radii=None, magnitudes=None,
                      abs_tol: float | None = None, rel_tol: float | None = None,
                      seed: int | None = None) -> ProbeReport:
    """Sample ``(x, u)`` with constant ``u`` and test the sandwich and the decay inequality.

    A sandwich violation is reported with ``failed_part="sandwich"``,
    a decay violation with ``failed_part="decay"``.
    """
    n_samples = n_samples or (getattr(budget, "n_samples", 200) if budget else 200)
    radii = radii or (getattr(budget, "radii", (0.1, 1.0, 10.0)) if budget else (0.1, 1.0, 10.0))
    magnitudes = magnitudes or (getattr(budget, "magnitudes", (0.0, 0.1, 1.0, 10.0))
                                if budget else (0.0, 0.1, 1.0, 10.0))
    abs_tol = abs_tol if abs_tol is not None else getattr(budget, "abs_tol", 1e-6)
    rel_tol = rel_tol if rel_tol is not None else getattr(budget, "rel_tol", 1e-6)
    seed = seed if seed is not None else getattr(budget, "seed", 0)
    # Dini estimates carry O(h) bias; allow for it relative to |V|.
    dini_tol = 1e-4
    rng = np.random.default_rng(seed)
    cells = [(R, M) for R in radii for M in magnitudes]
    per = max(1, math.ceil(n_samples / len(cells)))
    used = 0
    for R, M in cells:
        for k in range(per):
            used += 1
            x = _sample_state(rng, sys.state_dim, R, sys.norm) if k else np.eye(sys.state_dim)[0] * R
            uval = _sample_state(rng, sys.input_dim, M, sys.norm) if k else np.eye(sys.input_dim)[0] * M
            r = float(sys.state_norm(x))
            v = cert.V(x)
            lo, hi = cert.psi1(r), cert.psi2(r)
            stol = abs_tol + rel_tol * abs(v)
            if v < lo - stol or v > hi + stol:
                side = "lower" if v < lo - stol else "upper"
                margin = (lo - v) if side == "lower" else (v - hi)
                w = {"kind": "dissipative", "failed_part": "sandwich", "system": sys.spec,
                     "certificate": cert.to_json(), "x0": x.tolist(), "input": uval.tolist(),
                     "side": side, "lhs": v, "rhs": lo if side == "lower" else hi,
                     "margin": margin, "tolerance": stol}
                return ProbeReport("DISSIPATIVE", FALSIFIED, used, w, {"failed_part": "sandwich"})
            if r == 0.0:
                continue
            u = InputSignal.constant(uval)
            try:
                d = dini_derivative(sys, cert.V, x, u, check_gradient=False)
            except ValueError:
                continue
            unorm = float(vector_norm(uval, sys.norm))
            rhs = -cert.alpha(v) + cert.xi(unorm)
            tol = abs_tol + rel_tol * abs(rhs) + dini_tol * max(1.0, abs(v), abs(d))
            if d - rhs > tol:
                w = {"kind": "dissipative", "failed_part": "decay", "system": sys.spec,
                     "certificate": cert.to_json(), "x0": x.tolist(), "input": uval.tolist(),
                     "lhs": d, "rhs": rhs, "margin": d - rhs, "tolerance": tol}
                return ProbeReport("DISSIPATIVE", FALSIFIED, used, w, {"failed_part": "decay"})
    return ProbeReport("DISSIPATIVE", NO_COUNTEREXAMPLE, used)


# -- implication form --------------------------------------------------------

def check_implication(sub, cert: ImplicationCertificate, n_samples: int = 2000,
                      radius: float = 10.0, abs_tol: float = 1e-6, rel_tol: float = 1e-6,
                      seed: int = 0, premise_slack: float = PREMISE_SLACK) -> ProbeReport:
    """Check the implication-form decay of one subsystem by sampling.

    ``sub`` is a :class:`~isskit.systems.Subsystem`.  Half of the samples are
    drawn near the premise boundary: the neighbor states and input are
    rescaled so that their gain levels sit just below ``V_i(x_i)`` (exact
    for ``V`` homogeneous of degree one, approximate otherwise).  Points
    with ``x_i = 0`` are skipped because ``V_i`` need not be differentiable
    there.

    ``premise_fraction`` and the vacuity flag refer to the uniform samples
    only, since the boundary samples are constructed to satisfy the
    premise.
    """
    rng = np.random.default_rng(seed)
    n = sub.state_dim
    held = 0
    boundary_held = 0
    used = 0
    skipped = 0
    for k in range(n_samples):
        used += 1
        boundary = k % 2 == 1
        xi = _sample_state(rng, n, radius, "euclidean")
        xbar = [_sample_state(rng, d, radius, "euclidean") for d in sub.neighbor_dims]
        ui = _sample_state(rng, sub.input_dim, radius, "euclidean")
        vi = cert.V(xi)
        if boundary and vi > 0:
            # pull neighbor and input levels just under V_i
            for j, xj in enumerate(xbar):
                vj = cert.V(xj)
                target = _preimage_level(cert.neighbor_gain(j), vi * rng.uniform(0.9, 1.0))
                if vj > 0 and math.isfinite(target):
                    xbar[j] = xj * (target / vj)
            un = float(np.linalg.norm(ui))
            target = _preimage_level(cert.gamma_iu, vi * rng.uniform(0.9, 1.0))
            if un > 0 and math.isfinite(target):
                ui = ui * (target / un)
        g = cert.V.grad(xi)
        if g is None or vi == 0.0 or not np.all(np.isfinite(g)):
            skipped += 1
            continue
        levels = [cert.neighbor_gain(j)(cert.V(xj)) for j, xj in enumerate(xbar)]
        levels.append(cert.gamma_iu(float(np.linalg.norm(ui))))
        level = max(levels)
        if not vi > level + premise_slack:
            continue
        if boundary:
            boundary_held += 1
        else:
            held += 1
        lhs = float(g @ np.atleast_1d(sub.rhs(xi, xbar, ui)))
        rhs = -cert.alpha_tilde(vi)
        tol = abs_tol + rel_tol * abs(rhs)
        if lhs - rhs > tol:
            w = {"kind": "implication", "subsystem": getattr(sub, "spec", None),
                 "certificate": cert.to_json(), "xi": xi.tolist(),
                 "xbar": [v.tolist() for v in xbar], "ui": ui.tolist(), "V_i": vi,
                 "premise_level": level, "lhs": lhs, "rhs": rhs, "margin": lhs - rhs,
                 "tolerance": tol}
            return ProbeReport("IMPLICATION", FALSIFIED, used, w,
                               {"premise_fraction": held / max(1, _n_uniform(used)),
                                "boundary_premise_hits": boundary_held, "skipped": skipped})
    frac = held / max(1, _n_uniform(used))
    details = {"premise_fraction": frac, "vacuous": held == 0,
               "boundary_premise_hits": boundary_held, "skipped": skipped}
    if frac < 0.01:
        details["warning"] = "premise held on fewer than 1% of samples"
        warnings.warn(details["warning"], stacklevel=2)
    return ProbeReport("IMPLICATION", NO_COUNTEREXAMPLE, used, None, details)


def _n_uniform(used: int) -> int:
    """Number of uniform (non-boundary) samples among the first ``used``."""
    return (used + 1) // 2


def _preimage_level(g: ComparisonFn, level: float) -> float:
    if g.is_zero:
        return math.inf
    try:
        return cf.invert(g, level)
    except cf.RangeError:
        return math.inf


# -- beta, gamma from a dissipative certificate -------------------------------

def fit_iss_estimate(cert: DissipativeCertificate, v_max: float = 1e6, n: int = 400):
    """Comparison-principle ISS estimate from a dissipative certificate.

    Returns ``ISSEstimate`` with ``beta(r,t) = psi1^-1(psi2(r) e^{-lam t})``
    composed as a nested KL function and
    ``gamma = psi1^-1 o alpha^-1 o (2 xi)``, where
    ``lam = 0.5 * min alpha(v)/v`` over a log grid up to ``v_max``.
    Above the level ``alpha^-1(2 xi(|u|))`` the certificate gives
    ``dV <= -alpha(V)/2``; the exponential envelope is valid wherever
    ``alpha(v) >= 2 lam v``, so a sublinear ``alpha`` makes ``lam`` small
    and the estimate is only checked, never assumed.
    """
    from .probe import ISSEstimate

    vs = np.logspace(-6, math.log10(v_max), n)
    lam = 0.5 * float(np.min(np.asarray(cert.alpha(vs)) / vs))
    psi1_inv = cf.inverse(cert.psi1)
    p1, p2 = _power_params(cert.psi1), _power_params(cert.psi2)
    if p1 and p2 and p1[1] == p2[1]:
        # same homogeneity degree p: psi1^-1(b r^p e^{-lam t}) = (b/a)^(1/p) r e^{-lam t/p}
        (a, p), (b, _) = p1, p2
        beta = cf.kl_product(cf.linear((b / a) ** (1 / p)), cf.exp_decay(1.0, lam / p))
    else:
        def b(r, t):
            return psi1_inv(np.asarray(cert.psi2(r)) * np.exp(-lam * np.asarray(t)))
        beta = _CallableKL(b)
    if cert.xi.is_zero:
        gamma = cf.ZERO
    else:
        gamma = cf.compose(psi1_inv, cf.compose(cf.inverse(cert.alpha),
                                                cf.compose(cf.linear(2.0), cert.xi)))
    return ISSEstimate(beta, gamma)


def _power_params(g: ComparisonFn):
    if g.form == "linear":
        return float(g.params[0]), 1.0
    if g.form == "power":
        return float(g.params[0]), float(g.params[1])
    return None


@dataclass(frozen=True)
class _CallableKL:
    fn: Callable

    def __call__(self, r, t):
        return self.fn(r, t)

    def to_json(self):
        raise TypeError("callable KL function has no JSON form")
