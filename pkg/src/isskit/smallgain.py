"""Small-gain conditions, max-type gain operators and network Lyapunov functions.

Countable networks are represented by a truncation to ``N`` indices.  The
gain operator is ``Gamma(s)_i = max_{j in I_i} gamma_ij(s_j)``; missing
neighbors either drop out (zero padding) or wrap around (periodic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import comparison as cf
from .comparison import ComparisonFn
from .dynamics import SystemModel, integrate
from .lyapunov import ImplicationCertificate, check_implication
from .reports import (FALSIFIED, HYPOTHESIS_VIOLATION, NO_COUNTEREXAMPLE, ProbeReport)

__all__ = [
    "GainMatrix2", "SGCResult", "check_sgc_2", "sgc_operator_form", "GainOperator",
    "DecayPath", "PathVerdict", "verify_decay_path", "synthesize_decay_path",
    "SynthesisFailure", "composite_lyapunov", "check_network_iss", "default_r_grid",
    "TEMPLATE_FORMS", "TEMPLATE_PARAM_BOUND",
]

TEMPLATE_FORMS = frozenset({"zero", "linear", "power", "saturation", "table"})
TEMPLATE_PARAM_BOUND = 1e6


def default_r_grid(n: int = 200) -> np.ndarray:
    """``n`` log-spaced points on ``[1e-6, 1e6]``."""
    return np.logspace(-6, 6, n)


# -- two subsystems ----------------------------------------------------------

@dataclass(frozen=True)
class GainMatrix2:
    """Internal gains ``g12``, ``g21`` and external gains ``g1``, ``g2``."""

    g12: ComparisonFn
    g21: ComparisonFn
    g1: ComparisonFn = cf.IDENTITY
    g2: ComparisonFn = cf.IDENTITY

    def __post_init__(self):
        for name in ("g12", "g21", "g1", "g2"):
            g = getattr(self, name)
            if g.kind == cf.L:
                raise ValueError(f"{name} must be of class K or zero")

    def to_json(self) -> dict:
        return {k: getattr(self, k).to_json() for k in ("g12", "g21", "g1", "g2")}


@dataclass
class SGCResult:
    """``holds`` on the sampled set; ``witness`` is the violating ``r`` or ``s``."""

    holds: bool
    witness: object = None
    exact: bool | None = None
    max_ratio: float = 0.0
    checked: int = 0

    def to_json(self) -> dict:
        w = self.witness.tolist() if isinstance(self.witness, np.ndarray) else self.witness
        return {"holds": self.holds, "witness": w, "exact": self.exact,
                "max_ratio": self.max_ratio, "checked": self.checked}


def check_sgc_2(g: GainMatrix2, rho: ComparisonFn, r_grid=None) -> SGCResult:
    """Cyclic small-gain condition ``(id+rho) g12 (id+rho) g21 (r) < r`` on a grid.

    For linear ``rho``, ``g12``, ``g21`` the condition is also decided
    exactly by ``(1 + c_rho)^2 c12 c21 < 1`` and reported in ``exact``.
    """
    if rho.kind != cf.KINF:
        raise ValueError("rho must be of class K-infinity")
    r = default_r_grid() if r_grid is None else np.asarray(r_grid, float)
    ip = cf.id_plus(rho)
    cyc = ip(g.g12(ip(g.g21(r))))
    ratio = np.asarray(cyc) / r
    bad = np.nonzero(~(np.asarray(cyc) < r))[0]
    exact = None
    cs = [rho.linear_coefficient, g.g12.linear_coefficient, g.g21.linear_coefficient]
    if all(c is not None for c in cs):
        c, c12, c21 = cs
        exact = (1 + c) ** 2 * c12 * c21 < 1
    witness = float(r[bad[0]]) if bad.size else None
    return SGCResult(bad.size == 0, witness, exact, float(np.max(ratio)), len(r))


def _quarter_circle(n: int) -> np.ndarray:
    th = np.linspace(0.0, 0.5 * math.pi, n)
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def sgc_operator_form(gamma: GainOperator, rho: ComparisonFn, s_samples=None,
                      scales=None) -> SGCResult:
    """Check ``(id+rho)(Gamma(s)) >= s`` fails for every sampled ``s != 0`` (``N = 2``).

    Default samples are the unit quarter circle times log-spaced scales
    on ``[1e-6, 1e6]``; for linear gains the eigen-ray
    ``(sqrt(a), sqrt(b))`` with ``a = (1+c_rho) c12``, ``b = (1+c_rho) c21``
    is added, where a violation first appears.
    """
    if gamma.N != 2:
        raise ValueError("operator form is implemented for two subsystems")
    ip = cf.id_plus(rho)
    if s_samples is None:
        dirs = _quarter_circle(181)
        g12, g21 = gamma.gain(0, 1), gamma.gain(1, 0)
        c, c12, c21 = rho.linear_coefficient, g12.linear_coefficient, g21.linear_coefficient
        if None not in (c, c12, c21) and c12 > 0 and c21 > 0:
            a, b = (1 + c) * c12, (1 + c) * c21
            v = np.array([math.sqrt(a), math.sqrt(b)])
            dirs = np.vstack([v / np.linalg.norm(v), dirs])
        scales = np.logspace(-6, 6, 25) if scales is None else np.asarray(scales, float)
        s_samples = (dirs[None, :, :] * scales[:, None, None]).reshape(-1, 2)
    s_samples = np.asarray(s_samples, float)
    s_samples = s_samples[np.any(s_samples > 0, axis=1)]
    worst = 0.0
    for s in s_samples:
        img = np.asarray(ip(gamma.apply(s)), float)
        if np.all(img >= s):
            return SGCResult(False, s.copy(), None, math.inf, len(s_samples))
        pos = s > 0
        worst = max(worst, float(np.min(img[pos] / s[pos])))
    return SGCResult(True, None, None, worst, len(s_samples))


# -- gain operator -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GainOperator:
    """Max-type gain operator on ``N`` indices with finite neighbor sets.

    ``gains[i][k]`` is the gain from ``neighbors[i][k]`` to ``i``;
    ``gamma_u`` optionally holds the external gains (one shared function
    or one per index).
    """

    N: int
    neighbors: tuple
    gains: tuple
    gamma_u: object = None
    boundary: str = "zero"

    def __post_init__(self):
        if len(self.neighbors) != self.N or len(self.gains) != self.N:
            raise ValueError("neighbors and gains need one entry per index")
        for nb, gs in zip(self.neighbors, self.gains):
            if len(nb) != len(gs):
                raise ValueError("each neighbor needs exactly one gain")
            for j in nb:
                if not 0 <= j < self.N:
                    raise IndexError(f"neighbor index {j} outside the truncation 0..{self.N - 1}")

    @classmethod
    def from_neighbors(cls, neighbors, gain, gamma_u=None, boundary="zero") -> GainOperator:
        """One shared gain (a ComparisonFn) or a callable ``(i, j) -> ComparisonFn``."""
        nbs = tuple(tuple(int(j) for j in nb) for nb in neighbors)
        if isinstance(gain, ComparisonFn):
            gains = tuple(tuple(gain for _ in nb) for nb in nbs)
        else:
            gains = tuple(tuple(gain(i, j) for j in nb) for i, nb in enumerate(nbs))
        return cls(len(nbs), nbs, gains, gamma_u, boundary)

    @classmethod
    def line(cls, N: int, gain, gamma_u=None, boundary: str = "zero") -> GainOperator:
        """Nearest-neighbor chain; ``boundary="periodic"`` closes it into a ring."""
        if boundary == "periodic":
            nbs = [sorted({(i - 1) % N, (i + 1) % N} - {i}) for i in range(N)]
        elif boundary == "zero":
            nbs = [[j for j in (i - 1, i + 1) if 0 <= j < N] for i in range(N)]
        else:
            raise ValueError(f"unknown boundary {boundary!r}")
        return cls.from_neighbors(nbs, gain, gamma_u, boundary)

    @classmethod
    def ring(cls, N: int, gain, gamma_u=None) -> GainOperator:
        return cls.line(N, gain, gamma_u, "periodic")

    @classmethod
    def two(cls, g12: ComparisonFn, g21: ComparisonFn) -> GainOperator:
        return cls(2, ((1,), (0,)), ((g12,), (g21,)))

    def gain(self, i: int, j: int) -> ComparisonFn:
        """``gamma_ij``; the zero function when ``j`` is not a neighbor of ``i``."""
        for jj, g in zip(self.neighbors[i], self.gains[i]):
            if jj == j:
                return g
        return cf.ZERO

    def external_gain(self, i: int) -> ComparisonFn:
        if self.gamma_u is None:
            return cf.ZERO
        if isinstance(self.gamma_u, ComparisonFn):
            return self.gamma_u
        return self.gamma_u[i]

    def _shared_gain(self):
        first = None
        for gs in self.gains:
            for g in gs:
                if first is None:
                    first = g
                elif g is not first:
                    return None
        return first

    def apply(self, s) -> np.ndarray:
        """``Gamma(s)_i = max_{j in I_i} gamma_ij(s_j)`` (0 for an empty neighbor set)."""
        s = np.asarray(s, float)
        if s.shape != (self.N,):
            raise IndexError(f"sequence has shape {s.shape}, operator acts on ({self.N},)")
        if np.any(s < 0):
            raise ValueError("gain operator acts on nonnegative sequences")
        out = np.zeros(self.N)
        shared = self._shared_gain()
        if shared is not None:
            gs = np.asarray(shared(s), float)
            for i, nb in enumerate(self.neighbors):
                if nb:
                    out[i] = gs[list(nb)].max()
            return out
        for i, (nb, gs) in enumerate(zip(self.neighbors, self.gains)):
            if nb:
                out[i] = max(float(g(s[j])) for j, g in zip(nb, gs))
        return out

    def templates_ok(self) -> tuple[bool, str]:
        """All gains from the template family with parameters bounded by ``TEMPLATE_PARAM_BOUND``.

        This is the structural stand-in for a common modulus of continuity.
        """
        seen = set()
        for gs in self.gains:
            for g in gs:
                if id(g) in seen:
                    continue
                seen.add(id(g))
                if g.form not in TEMPLATE_FORMS:
                    return False, f"gain form {g.form!r} is not a template"
                flat = []
                for p in g.params:
                    flat.extend(np.ravel(p).tolist() if isinstance(p, (tuple, list, np.ndarray)) else [p])
                if any(abs(float(p)) > TEMPLATE_PARAM_BOUND for p in flat):
                    return False, f"gain parameters of {g!r} exceed {TEMPLATE_PARAM_BOUND:g}"
        return True, "ok"

    def modulus_of_continuity(self, R: float, n: int = 2001) -> float:
        """Largest sampled Lipschitz constant of the gains on ``[0, R]``."""
        seen, worst = set(), 0.0
        for gs in self.gains:
            for g in gs:
                if id(g) not in seen:
                    seen.add(id(g))
                    worst = max(worst, cf.lipschitz_estimate(g, 0.0, R, n))
        return worst

    def is_monotone_on(self, s, s2) -> bool:
        return bool(np.all(self.apply(s) <= self.apply(s2)))

    def to_json(self) -> dict:
        d = {"N": self.N, "boundary": self.boundary, "neighbors": [list(nb) for nb in self.neighbors]}
        shared = self._shared_gain()
        if shared is not None:
            d["gain"] = shared.to_json()
        else:
            d["gains"] = [[g.to_json() for g in gs] for gs in self.gains]
        return d


# -- path of strict decay ----------------------------------------------------

@dataclass(frozen=True)
class DecayPath:
    """Per-index ``sigma_i`` with envelopes ``sigma_min <= sigma_i <= sigma_max``."""

    rho: ComparisonFn
    sigmas: tuple
    sigma_min: ComparisonFn
    sigma_max: ComparisonFn

    @property
    def N(self) -> int:
        return len(self.sigmas)

    def __call__(self, r: float) -> np.ndarray:
        return np.array([float(s(r)) for s in self.sigmas])

    def inverse_at(self, i: int, v: float) -> float:
        return cf.invert(self.sigmas[i], v)

    def to_json(self) -> dict:
        shared = all(s is self.sigmas[0] for s in self.sigmas)
        d = {"rho": self.rho.to_json(), "sigma_min": self.sigma_min.to_json(),
             "sigma_max": self.sigma_max.to_json(), "N": self.N}
        if shared:
            d["sigma"] = self.sigmas[0].to_json()
        else:
            d["sigmas"] = [s.to_json() for s in self.sigmas]
        return d

    @classmethod
    def from_json(cls, d: dict) -> DecayPath:
        if "sigma" in d:
            s = cf.from_json(d["sigma"])
            sig = tuple(s for _ in range(d["N"]))
        else:
            sig = tuple(cf.from_json(x) for x in d["sigmas"])
        return cls(cf.from_json(d["rho"]), sig, cf.from_json(d["sigma_min"]),
                   cf.from_json(d["sigma_max"]))


@dataclass
class PathVerdict:
    """Outcome of the four path conditions; ``failure`` names the first violation."""

    holds: bool
    conditions: dict = field(default_factory=dict)
    failure: dict | None = None
    intervals_checked: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"holds": self.holds, "conditions": self.conditions, "failure": self.failure,
                "intervals_checked": self.intervals_checked}


DEFAULT_COMPACTS = ((1e-3, 1e-2), (1e-1, 1.0), (1.0, 10.0), (10.0, 100.0))


def verify_decay_path(gamma: GainOperator, path: DecayPath, r_grid=None, *,
                      compacts=DEFAULT_COMPACTS, abs_tol: float = 1e-12,
                      rel_tol: float = 1e-9) -> PathVerdict:
    """Check the four path conditions on a grid.

    (i) ``Gamma(sigma(r))_i <= (id+rho)^-1(sigma_i(r))``;
    (ii) ``sigma_min <= sigma_i <= sigma_max``;
    (iii) every ``sigma_i`` is of class K-infinity and strictly increasing
    on the grid;
    (iv) ``sigma_i^-1`` has difference quotients in ``[c, C]`` with
    ``0 < c <= C < inf`` on each sampled compact interval.
    """
    if path.N != gamma.N:
        raise ValueError("path and operator have different index ranges")
    r = np.logspace(-4, 4, 81) if r_grid is None else np.asarray(r_grid, float)
    r = r[r > 0]
    ip = cf.id_plus(path.rho)
    shared = all(s is path.sigmas[0] for s in path.sigmas)
    conds = {}
    S = np.empty((len(r), path.N))
    if shared:
        S[:] = np.asarray(path.sigmas[0](r), float)[:, None]
    else:
        for i, s in enumerate(path.sigmas):
            S[:, i] = s(r)
    # (i)
    fail = None
    for k, rk in enumerate(r):
        lhs = gamma.apply(S[k])
        if shared:
            rhs = np.full(path.N, cf.invert(ip, float(S[k, 0])))
        else:
            rhs = np.array([cf.invert(ip, float(v)) for v in S[k]])
        bad = np.nonzero(lhs > rhs + abs_tol + rel_tol * rhs)[0]
        if bad.size:
            i = int(bad[0])
            fail = {"condition": "i", "index": i, "r": float(rk), "lhs": float(lhs[i]),
                    "rhs": float(rhs[i]), "margin": float(lhs[i] - rhs[i])}
            break
    conds["i"] = fail is None
    # (ii)
    lo, hi = np.asarray(path.sigma_min(r), float), np.asarray(path.sigma_max(r), float)
    tol = abs_tol + rel_tol * np.abs(S)
    bad = np.argwhere((S < lo[:, None] - tol) | (S > hi[:, None] + tol))
    conds["ii"] = bad.size == 0
    if bad.size and fail is None:
        k, i = map(int, bad[0])
        fail = {"condition": "ii", "index": i, "r": float(r[k]), "sigma_i": float(S[k, i]),
                "sigma_min": float(lo[k]), "sigma_max": float(hi[k])}
    # (iii)
    ok3 = True
    for i, s in enumerate(path.sigmas[:1] if shared else path.sigmas):
        if s.kind != cf.KINF or float(s(0.0)) != 0.0 or not np.all(np.diff(S[:, i]) > 0):
            ok3 = False
            if fail is None:
                fail = {"condition": "iii", "index": i}
            break
    conds["iii"] = ok3
    # (iv)
    ok4, checked = True, []
    for a, b in compacts:
        vs = np.linspace(a, b, 33)
        cmin, cmax = math.inf, 0.0
        for s in (path.sigmas[:1] if shared else path.sigmas):
            inv = np.array([cf.invert(s, float(v)) for v in vs])
            q = np.diff(inv) / np.diff(vs)
            cmin, cmax = min(cmin, float(q.min())), max(cmax, float(q.max()))
        checked.append({"interval": [a, b], "c": cmin, "C": cmax})
        if not (cmin > 0 and math.isfinite(cmax)):
            ok4 = False
            if fail is None:
                fail = {"condition": "iv", "interval": [a, b], "c": cmin, "C": cmax}
    conds["iv"] = ok4
    return PathVerdict(all(conds.values()), conds, fail, checked)


class SynthesisFailure(RuntimeError):
    """No decay path was found; ``witness`` holds the violating index and level."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


def _fixed_point(gamma, ip, r, max_iter, tol, blowup):
    s = np.full(gamma.N, r)
    for k in range(max_iter):
        nxt = np.maximum(r, np.asarray(ip(gamma.apply(s)), float))
        if np.max(nxt) > blowup * r:
            return None, k, int(np.argmax(nxt))
        if np.max(np.abs(nxt - s)) <= tol * r:
            return nxt, k, None
        s = nxt
    return None, max_iter, int(np.argmax(s))


def synthesize_decay_path(gamma: GainOperator, rho_guess: ComparisonFn = cf.linear(0.25), *,
                          r_grid=None, max_iter: int = 10_000, tol: float = 1e-13,
                          retries: int = 4, blowup: float = 1e8) -> DecayPath:
    """Best-effort construction of a path of strict decay.

    For each level ``r`` the iteration
    ``s <- max(r, (id+rho)(Gamma(s)))`` runs from the constant sequence
    ``r``; a limit satisfies condition (i) by construction.  Linear gains
    make the limit linear in ``r`` so one level suffices; otherwise a
    monotone table per index is fitted through the levels of ``r_grid``.
    The candidate must pass :func:`verify_decay_path`; on failure ``rho``
    is halved up to ``retries`` times.

    Raises
    ------
    SynthesisFailure
        If the iteration diverges or verification keeps failing.
    """
    rho = rho_guess
    last = None
    all_linear = all(g.linear_coefficient is not None for gs in gamma.gains for g in gs)
    levels = np.array([1.0]) if all_linear else (
        np.logspace(-4, 4, 33) if r_grid is None else np.asarray(r_grid, float))
    for attempt in range(retries + 1):
        ip = cf.id_plus(rho)
        fps = []
        for r in levels:
            s, iters, idx = _fixed_point(gamma, ip, float(r), max_iter, tol, blowup)
            if s is None:
                last = {"reason": "iteration did not converge", "index": idx, "r": float(r),
                        "iterations": iters, "rho": rho.to_json()}
                break
            fps.append(s)
        else:
            path = _fit_path(rho, levels, np.array(fps), all_linear)
            verdict = verify_decay_path(gamma, path)
            if verdict.holds:
                return path
            last = {"reason": "verification failed", **(verdict.failure or {}), "rho": rho.to_json()}
        c = rho.linear_coefficient
        rho = cf.linear(0.5 * c) if c is not None else cf.compose(cf.linear(0.5), rho)
    raise SynthesisFailure(f"no decay path found ({last['reason']})", last)


def _fit_path(rho, levels, fps, linear) -> DecayPath:
    if linear:
        v = fps[0] / levels[0]
        uniq = {}
        sig = []
        for vi in v:
            key = float(vi)
            if key not in uniq:
                uniq[key] = cf.IDENTITY if key == 1.0 else cf.linear(key)
            sig.append(uniq[key])
        return DecayPath(rho, tuple(sig), cf.linear(float(v.min())), cf.linear(float(v.max())))
    sig = []
    for i in range(fps.shape[1]):
        ys = np.maximum.accumulate(fps[:, i])
        knots = [(0.0, 0.0)] + list(zip(levels.tolist(), ys.tolist()))
        slope = (ys[-1] - ys[-2]) / (levels[-1] - levels[-2])
        sig.append(cf.table(knots, max(slope, 1.0)))
    lo = np.min(fps, axis=1)
    hi = np.max(fps, axis=1)
    smin = cf.table([(0.0, 0.0)] + list(zip(levels.tolist(), np.minimum.accumulate(lo[::-1])[::-1].tolist())), 1.0)
    smax = cf.table([(0.0, 0.0)] + list(zip(levels.tolist(), np.maximum.accumulate(hi).tolist())),
                    max(float((hi[-1] - hi[-2]) / (levels[-1] - levels[-2])), 1.0))
    return DecayPath(rho, tuple(sig), smin, smax)


# -- composite Lyapunov function ---------------------------------------------

def composite_lyapunov(V, path: DecayPath, x) -> float | np.ndarray:
    """``V(x) = max_i sigma_i^-1(V_i(x_i))`` over the represented indices.

    ``V`` is one LyapunovFn shared by all scalar components or a list of
    them.  ``x`` may be a single state ``(N,)`` or a batch ``(T, N)``.
    """
    x = np.asarray(x, float)
    if x.ndim == 2:
        return np.array([composite_lyapunov(V, path, row) for row in x])
    if isinstance(V, (list, tuple)):
        vals = np.array([V[i](x[i:i + 1]) for i in range(path.N)])
    elif V.spec and V.spec.get("name") == "abs":
        vals = np.abs(x)
    else:
        vals = np.array([V(x[i:i + 1]) for i in range(path.N)])
    shared = all(s is path.sigmas[0] for s in path.sigmas)
    if shared and path.sigmas[0].linear_coefficient is not None:
        return float(np.max(vals) / path.sigmas[0].linear_coefficient)
    return float(max(cf.invert(s, float(v)) for s, v in zip(path.sigmas, vals)))


# -- network ISS -------------------------------------------------------------

def _lipschitz_V(V, R: float, n: int = 500, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    a = rng.uniform(-R, R, n)
    b = a + rng.normal(0.0, 1e-3 * R, n)
    va = np.array([V(np.array([t])) for t in a])
    vb = np.array([V(np.array([t])) for t in b])
    return float(np.max(np.abs(va - vb) / np.maximum(np.abs(a - b), 1e-300)))


def _network_estimate(cert: ImplicationCertificate, path: DecayPath, gamma_u_level):
    """Linear-case ISS estimate for the composite function, or None."""
    from .probe import ISSEstimate

    cs = [cert.psi1.linear_coefficient, cert.psi2.linear_coefficient,
          cert.alpha_tilde.linear_coefficient, path.sigma_min.linear_coefficient,
          path.sigma_max.linear_coefficient]
    if any(c is None for c in cs) or gamma_u_level is None:
        return None
    p1, p2, a, smin, smax = cs
    # psi1(|x|)/smax <= V <= psi2(|x|)/smin and dV <= -a V above the input level
    beta = cf.kl_product(cf.linear(p2 * smax / (smin * p1)), cf.exp_decay(1.0, a))
    gamma = cf.linear(smax * gamma_u_level / p1)
    return ISSEstimate(beta, gamma)


def check_network_iss(net: SystemModel, cert: ImplicationCertificate, path: DecayPath | None,
                      budget=None, *, gamma: GainOperator | None = None,
                      representatives=None, n_implication: int = 2000) -> ProbeReport:
    """Check the network-level ISS conclusion for a truncated network.

    Hypotheses (decay path, implication form for representative
    subsystems, Lipschitz bound of ``V_i``) are checked first; any failure
    gives ``hypothesis_violation``.  Then sampled trajectories are
    integrated and the composite function must not increase while it
    exceeds the input level ``max_i sigma_i^-1(gamma_iu(|u|))``.  Finally
    an ISS estimate fitted from the certificate is probed.
    """
    from .probe import SamplingBudget, _base_witness, check_iss_estimate, sample_cases

    budget = budget or SamplingBudget(n_samples=48, horizon=20.0, radii=(0.1, 1.0, 10.0),
                                      magnitudes=(0.0, 0.1, 1.0))
    N = net.state_dim
    hyp = {}
    gamma = gamma or GainOperator.from_neighbors(net.neighbors, cert.gamma_ij
                                                 if isinstance(cert.gamma_ij, ComparisonFn)
                                                 else (lambda i, j: cert.gamma_ij[0]),
                                                 cert.gamma_iu, getattr(net, "boundary", "zero"))
    ok_t, why = gamma.templates_ok()
    hyp["templates"] = why
    if not ok_t:
        return ProbeReport("NETWORK_ISS", HYPOTHESIS_VIOLATION, 0, None, hyp)
    if path is None:
        try:
            path = synthesize_decay_path(gamma)
        except SynthesisFailure as exc:
            hyp["decay_path"] = {"holds": False, "failure": exc.witness}
            return ProbeReport("NETWORK_ISS", HYPOTHESIS_VIOLATION, 0, None, hyp)
    pv = verify_decay_path(gamma, path)
    hyp["decay_path"] = pv.to_json()
    if not pv.holds:
        return ProbeReport("NETWORK_ISS", HYPOTHESIS_VIOLATION, 0, None, hyp)
    reps = representatives or sorted({0, N // 2, N - 1})
    imp = {}
    for i in reps:
        rep = check_implication(net.subsystem(i), cert, n_samples=n_implication, seed=budget.seed + i)
        imp[i] = rep.to_json()
        if not rep.passed or rep.details.get("vacuous"):
            hyp["implication"] = imp
            return ProbeReport("NETWORK_ISS", HYPOTHESIS_VIOLATION, 0, rep.witness, hyp)
    hyp["implication"] = {i: imp[i]["details"] for i in imp}
    hyp["V_lipschitz"] = _lipschitz_V(cert.V, max(budget.radii))

    # conclusion: composite decay above the input level
    rng = np.random.default_rng(budget.seed)
    used = 0
    inv_levels = [cf.inverse(s) for s in path.sigmas[:1]] if \
        all(s is path.sigmas[0] for s in path.sigmas) else [cf.inverse(s) for s in path.sigmas]
    for x0, u in sample_cases(net, budget.radii, budget.magnitudes, budget.n_samples,
                              budget.horizon, budget.max_pieces, rng):
        used += 1
        tr = integrate(net, x0, u, budget.horizon, rel_tol=budget.int_rel_tol,
                       abs_tol=budget.int_abs_tol)
        ts, xs = tr.grid(budget.grid_points)
        Vt = composite_lyapunov(cert.V, path, xs)
        unorm = u.sup_norm(norm="max")
        level = max(float(f(cert.gamma_iu(unorm))) for f in inv_levels)
        above = Vt[:-1] > level
        rise = Vt[1:] - Vt[:-1]
        tol = budget.abs_tol + budget.rel_tol * np.abs(Vt[:-1])
        bad = np.nonzero(above & (rise > tol))[0]
        if bad.size:
            k = int(bad[0])
            w = _base_witness("network_decay", "NETWORK_ISS", net, x0, u, budget)
            w.update({"t": float(ts[k + 1]), "t_prev": float(ts[k]), "lhs": float(Vt[k + 1]),
                      "rhs": float(Vt[k]), "margin": float(rise[k]), "tolerance": float(tol[k]),
                      "input_level": level, "certificate": cert.to_json(), "path": path.to_json()})
            return ProbeReport("NETWORK_ISS", FALSIFIED, used, w, hyp)
    giu = cert.gamma_iu.linear_coefficient
    lvl = giu / path.sigma_min.linear_coefficient if (
        giu is not None and path.sigma_min.linear_coefficient) else None
    est = _network_estimate(cert, path, lvl)
    details = dict(hyp)
    if est is not None:
        iss = check_iss_estimate(net, est, budget)
        details["fitted_estimate"] = est.to_json()
        details["iss_probe"] = {"verdict": iss.verdict, "samples_used": iss.samples_used}
        if iss.falsified:
            return ProbeReport("NETWORK_ISS", FALSIFIED, used + iss.samples_used, iss.witness, details)
        used += iss.samples_used
    else:
        details["fitted_estimate"] = None
    return ProbeReport("NETWORK_ISS", NO_COUNTEREXAMPLE, used, None, details)
