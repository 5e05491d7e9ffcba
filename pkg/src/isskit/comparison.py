"""Comparison functions of class K, K-infinity and L, plus factored KL functions.

A :class:`ComparisonFn` is an immutable value.  Parametric forms keep exact
algebra (compositions of linear and power maps collapse to a single power
map, inverses are closed-form); piecewise-linear tables cover gains that were
estimated from data.  Everything else falls back to nested evaluation and
bracketing bisection.

    >>> g = linear(2.0)
    >>> g(3.0)
    6.0
    >>> compose(g, power(1.0, 2.0))(3.0)
    18.0
    >>> round(invert(power(1.0, 2.0), 4.0), 12)
    2.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "ComparisonFn", "KLFn", "RangeError", "ZERO", "IDENTITY",
    "zero", "linear", "power", "saturation", "table", "exp_decay",
    "rational_decay", "l_table", "from_callable", "compose", "id_plus",
    "invert", "inverse", "evaluate", "is_strictly_increasing",
    "lipschitz_estimate", "kl_product", "kl_nested",
]

MIN_TABLE_SLOPE = 1e-12

K, KINF, L = "k", "kinf", "l"
_KIND_NAMES = {"k": K, "kinf": KINF, "l": L}


class RangeError(ValueError):
    """Argument lies outside the range of a bounded class-K function."""


@dataclass(frozen=True, eq=False)
class ComparisonFn:
    """A monotone scalar function on the nonnegative reals.

    Use the factory functions (:func:`linear`, :func:`power`, :func:`table`,
    ...) rather than the constructor.
    """

    kind: str
    form: str
    params: tuple = ()
    parts: tuple = ()
    fn: Callable | None = field(default=None, repr=False)

    def __call__(self, s):
        return evaluate(self, s)

    @property
    def is_zero(self) -> bool:
        return self.form == "zero"

    @property
    def linear_coefficient(self) -> float | None:
        """Slope if the function is exactly ``s -> c*s`` (0 for the zero gain)."""
        if self.form == "zero":
            return 0.0
        if self.form == "linear":
            return self.params[0]
        return None

    @property
    def sup(self) -> float:
        """Supremum of the function over ``[0, inf)``."""
        if self.kind == L:
            return float(evaluate(self, 0.0))
        f = self.form
        if f == "zero":
            return 0.0
        if f == "saturation":
            c, p = self.params
            return c if p == 1.0 else math.inf
        if f == "compose":
            outer, inner = self.parts
            s = inner.sup
            return outer.sup if math.isinf(s) else float(evaluate(outer, s))
        if f == "callable":
            return self.params[0]
        return math.inf

    def to_json(self) -> dict[str, Any]:
        f = self.form
        d: dict[str, Any] = {"kind": self.kind, "form": f}
        if f in ("linear",):
            d["c"] = self.params[0]
        elif f in ("power", "saturation"):
            d["c"], d["p"] = self.params
        elif f == "table":
            xs, ys, slope = self.params
            d["knots"] = [[x, y] for x, y in zip(xs, ys)]
            d["slope"] = slope
        elif f == "exp":
            d["c"], d["rate"] = self.params
        elif f == "rational":
            d["c"], d["p"] = self.params
        elif f == "compose":
            d["outer"] = self.parts[0].to_json()
            d["inner"] = self.parts[1].to_json()
        elif f == "id_plus":
            d["rho"] = self.parts[0].to_json()
        elif f == "inverse":
            d["of"] = self.parts[0].to_json()
        elif f == "callable":
            raise TypeError("callable comparison functions are not serializable")
        return d

    @staticmethod
    def from_json(d: dict[str, Any]) -> ComparisonFn:
        return from_json(d)

    def __repr__(self) -> str:
        if self.form == "compose":
            return f"({self.parts[0]!r} o {self.parts[1]!r})"
        if self.form == "id_plus":
            return f"(id + {self.parts[0]!r})"
        if self.form == "inverse":
            return f"{self.parts[0]!r}^-1"
        if self.form == "table":
            return f"table[{len(self.params[0])} knots, slope={self.params[2]:g}]"
        if self.form == "callable":
            return f"callable<{self.kind}>"
        args = ", ".join(f"{p:g}" for p in self.params)
        return f"{self.form}({args})"


# -- factories ---------------------------------------------------------------

def zero() -> ComparisonFn:
    """The zero gain (admitted wherever the theory allows K U {0})."""
    return ZERO


def linear(c: float) -> ComparisonFn:
    c = float(c)
    if not c > 0 or not math.isfinite(c):
        raise ValueError(f"linear gain needs c > 0, got {c}")
    return ComparisonFn(KINF, "linear", (c,))


def power(c: float, p: float) -> ComparisonFn:
    c, p = float(c), float(p)
    if not (c > 0 and p > 0) or not (math.isfinite(c) and math.isfinite(p)):
        raise ValueError(f"power form needs c > 0, p > 0, got c={c}, p={p}")
    if p == 1.0:
        return linear(c)
    return ComparisonFn(KINF, "power", (c, p))


def saturation(c: float, p: float = 1.0) -> ComparisonFn:
    """``s -> c*s**p/(1+s)``: bounded class K for ``p == 1``, K-infinity for ``p > 1``."""
    c, p = float(c), float(p)
    if not c > 0 or p < 1.0:
        raise ValueError(f"saturation form needs c > 0, p >= 1, got c={c}, p={p}")
    return ComparisonFn(K if p == 1.0 else KINF, "saturation", (c, p))


def table(knots, slope: float, kind: str = KINF) -> ComparisonFn:
    """Piecewise-linear class-K function through ``knots``, linear extrapolation beyond.

    The first knot must be ``(0, 0)``; segment slopes must be at least
    ``MIN_TABLE_SLOPE`` and the extrapolation ``slope`` must be positive.
    """
    kind = _KIND_NAMES.get(str(kind).lower(), None)
    if kind not in (K, KINF):
        raise ValueError("use l_table for class-L tables")
    pts = np.asarray(knots, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("table needs at least two (s, value) knots")
    xs, ys = pts[:, 0], pts[:, 1]
    if xs[0] != 0.0 or ys[0] != 0.0:
        raise ValueError("class-K table must start at (0, 0)")
    dx, dy = np.diff(xs), np.diff(ys)
    if np.any(dx <= 0):
        raise ValueError("table abscissae must be strictly increasing")
    if np.any(dy < MIN_TABLE_SLOPE * dx):
        bad = int(np.argmin(dy / dx))
        raise ValueError(f"table not strictly increasing on segment {bad} "
                         f"[{xs[bad]:g}, {xs[bad + 1]:g}]")
    slope = float(slope)
    if not slope > 0 or not math.isfinite(slope):
        raise ValueError("table extrapolation slope must be positive")
    return ComparisonFn(kind, "table", (tuple(xs.tolist()), tuple(ys.tolist()), slope))


def exp_decay(c: float, rate: float) -> ComparisonFn:
    """Class-L function ``t -> c*exp(-rate*t)``."""
    c, rate = float(c), float(rate)
    if not (c > 0 and rate > 0):
        raise ValueError("exp_decay needs c > 0 and rate > 0")
    return ComparisonFn(L, "exp", (c, rate))


def rational_decay(c: float, p: float) -> ComparisonFn:
    """Class-L function ``t -> c/(1+t)**p``."""
    c, p = float(c), float(p)
    if not (c > 0 and p > 0):
        raise ValueError("rational_decay needs c > 0 and p > 0")
    return ComparisonFn(L, "rational", (c, p))


def l_table(knots, rate: float) -> ComparisonFn:
    """Strictly decreasing class-L table with an exponential tail of the given rate."""
    pts = np.asarray(knots, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("table needs at least two knots")
    xs, ys = pts[:, 0], pts[:, 1]
    if xs[0] != 0.0:
        raise ValueError("class-L table must start at t = 0")
    dx, dy = np.diff(xs), np.diff(ys)
    if np.any(dx <= 0) or np.any(-dy < MIN_TABLE_SLOPE * dx) or ys[-1] <= 0:
        raise ValueError("class-L table must be strictly decreasing and positive")
    if not rate > 0:
        raise ValueError("tail rate must be positive")
    return ComparisonFn(L, "table", (tuple(xs.tolist()), tuple(ys.tolist()), float(rate)))


def from_callable(fn: Callable, kind: str = KINF, sup: float = math.inf) -> ComparisonFn:
    """Wrap an arbitrary monotone map; no class checks, not serializable."""
    kind = _KIND_NAMES[str(kind).lower()]
    return ComparisonFn(kind, "callable", (float(sup),), (), fn)


ZERO = ComparisonFn(K, "zero")
IDENTITY = ComparisonFn(KINF, "linear", (1.0,))


# -- evaluation --------------------------------------------------------------

def evaluate(g: ComparisonFn, s):
    """Evaluate ``g`` at ``s >= 0`` (scalar or array)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("comparison functions are defined on [0, inf) only")
    out = _eval(g, arr)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _eval(g: ComparisonFn, s: np.ndarray):
    f = g.form
    if f == "zero":
        return np.zeros_like(s)
    if f == "linear":
        return g.params[0] * s
    if f == "power":
        c, p = g.params
        return c * s ** p
    if f == "saturation":
        c, p = g.params
        return c * s ** p / (1.0 + s)
    if f == "table":
        xs, ys, slope = g.params
        if g.kind == L:
            inside = np.interp(s, xs, ys)
            tail = ys[-1] * np.exp(-slope * np.maximum(s - xs[-1], 0.0))
        else:
            inside = np.interp(s, xs, ys)
            tail = ys[-1] + slope * (s - xs[-1])
        return np.where(s <= xs[-1], inside, tail)
    if f == "exp":
        c, rate = g.params
        return c * np.exp(-rate * s)
    if f == "rational":
        c, p = g.params
        return c / (1.0 + s) ** p
    if f == "compose":
        outer, inner = g.parts
        return _eval(outer, np.asarray(_eval(inner, s), dtype=float))
    if f == "id_plus":
        return s + _eval(g.parts[0], s)
    if f == "inverse":
        of = g.parts[0]
        if np.ndim(s) == 0:
            return np.float64(invert(of, float(s)))
        return np.array([invert(of, float(v)) for v in s.ravel()]).reshape(s.shape)
    if f == "callable":
        return np.asarray(g.fn(s), dtype=float)
    raise ValueError(f"unknown form {f!r}")


# -- algebra -----------------------------------------------------------------

def _check_k_type(g: ComparisonFn, role: str) -> None:
    if g.kind == L:
        raise ValueError(f"{role} must be of class K / K-infinity, got class L")


def compose(outer: ComparisonFn, inner: ComparisonFn) -> ComparisonFn:
    """Return ``outer o inner``.  A zero factor makes the whole chain zero."""
    _check_k_type(outer, "outer")
    _check_k_type(inner, "inner")
    if outer.is_zero or inner.is_zero:
        return ZERO
    fo, fi = outer.form, inner.form
    if fo in ("linear", "power") and fi in ("linear", "power"):
        c1, p1 = outer.params if fo == "power" else (outer.params[0], 1.0)
        c2, p2 = inner.params if fi == "power" else (inner.params[0], 1.0)
        return power(c1 * c2 ** p1, p1 * p2)
    if fo == "inverse" and outer.parts[0] is inner:
        return IDENTITY
    if fi == "inverse" and inner.parts[0] is outer:
        return IDENTITY
    kind = KINF if (outer.kind == KINF and inner.kind == KINF) else K
    return ComparisonFn(kind, "compose", (), (outer, inner))


def id_plus(rho: ComparisonFn) -> ComparisonFn:
    """Return ``s -> s + rho(s)``."""
    _check_k_type(rho, "rho")
    c = rho.linear_coefficient
    if c is not None:
        return linear(1.0 + c)
    return ComparisonFn(KINF, "id_plus", (), (rho,))


def invert(g: ComparisonFn, r: float, tol: float = 1e-9) -> float:
    """Solve ``g(s) = r`` for ``s``.

    Closed forms are used for linear, power and table representations and
    nested inversion for compositions; other forms use bracketing bisection
    carried to machine resolution (``tol`` is the relative residual the
    result is guaranteed to meet whenever the function is not steeper than
    floating point can resolve).
    """
    r = float(r)
    if r < 0 or math.isnan(r):
        raise ValueError("invert needs r >= 0")
    _check_k_type(g, "inverted function")
    if r == 0.0:
        return 0.0
    if r >= g.sup:
        raise RangeError(f"{r:g} is outside the range [0, {g.sup:g}) of {g!r}")
    f = g.form
    if f == "linear":
        return r / g.params[0]
    if f == "power":
        c, p = g.params
        return (r / c) ** (1.0 / p)
    if f == "table":
        xs, ys, slope = g.params
        if r <= ys[-1]:
            return float(np.interp(r, ys, xs))
        return xs[-1] + (r - ys[-1]) / slope
    if f == "inverse":
        return float(evaluate(g.parts[0], r))
    if f == "compose":
        outer, inner = g.parts
        return invert(inner, invert(outer, r, tol), tol)
    return _bisect(g, r)


def _bisect(g: ComparisonFn, r: float) -> float:
    lo, hi = 0.0, 1.0
    while _eval(g, np.float64(hi)) < r:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise RangeError(f"no preimage of {r:g} found below 1e300")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _eval(g, np.float64(mid)) < r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def inverse(g: ComparisonFn) -> ComparisonFn:
    """The inverse function ``g^-1`` as a comparison function."""
    _check_k_type(g, "inverted function")
    if g.is_zero:
        raise RangeError("the zero gain has no inverse")
    f = g.form
    if f == "linear":
        return linear(1.0 / g.params[0])
    if f == "power":
        c, p = g.params
        return power(c ** (-1.0 / p), 1.0 / p)
    if f == "inverse":
        return g.parts[0]
    if f == "table":
        xs, ys, slope = g.params
        return table(list(zip(ys, xs)), 1.0 / slope, kind=KINF)
    if f == "compose":
        outer, inner = g.parts
        return compose(inverse(inner), inverse(outer))
    return ComparisonFn(KINF if g.kind == KINF else K, "inverse", (), (g,))


def is_strictly_increasing(g: ComparisonFn, grid) -> bool:
    """Grid test used for class membership checks."""
    grid = np.sort(np.asarray(grid, dtype=float))
    vals = np.asarray(evaluate(g, grid), dtype=float)
    return bool(np.all(np.diff(vals) > 0))


def lipschitz_estimate(g: ComparisonFn, a: float, b: float, n: int = 2001) -> float:
    """Largest difference quotient of ``g`` on a uniform grid over ``[a, b]``."""
    s = np.linspace(a, b, n)
    v = np.asarray(evaluate(g, s), dtype=float)
    return float(np.max(np.abs(np.diff(v)) / np.diff(s)))


# -- KL functions ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KLFn:
    """``beta(r, t) = q(r)*d(t)`` (form ``product``) or ``q(r*d(t))`` (``nested``)."""

    form: str
    q: ComparisonFn
    d: ComparisonFn

    def __post_init__(self):
        if self.form not in ("product", "nested"):
            raise ValueError(f"unknown KL form {self.form!r}")
        if self.q.kind == L or self.d.kind != L:
            raise ValueError("KL function needs q of class K and d of class L")

    def __call__(self, r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.form == "product":
            out = np.asarray(evaluate(self.q, r)) * np.asarray(evaluate(self.d, t))
        else:
            out = evaluate(self.q, r * np.asarray(evaluate(self.d, t)))
        return float(out) if np.ndim(out) == 0 else out

    def at_zero(self) -> ComparisonFn:
        """``r -> beta(r, 0)``."""
        d0 = float(evaluate(self.d, 0.0))
        if self.form == "product":
            return compose(linear(d0), self.q)
        return compose(self.q, linear(d0))

    def to_json(self) -> dict[str, Any]:
        return {"form": self.form, "q": self.q.to_json(), "d": self.d.to_json()}

    @staticmethod
    def from_json(d: dict[str, Any]) -> KLFn:
        return KLFn(d["form"], from_json(d["q"]), from_json(d["d"]))


def kl_product(q: ComparisonFn, d: ComparisonFn) -> KLFn:
    return KLFn("product", q, d)


def kl_nested(q: ComparisonFn, d: ComparisonFn) -> KLFn:
    return KLFn("nested", q, d)


# -- JSON --------------------------------------------------------------------

def from_json(d: dict[str, Any]) -> ComparisonFn:
    """Inverse of :meth:`ComparisonFn.to_json`."""
    form = d["form"]
    kind = _KIND_NAMES.get(str(d.get("kind", "kinf")).lower())
    if kind is None:
        raise ValueError(f"unknown kind {d.get('kind')!r}")
    if form == "zero":
        return ZERO
    if form == "linear":
        return linear(d["c"])
    if form == "power":
        return power(d["c"], d["p"])
    if form == "saturation":
        return saturation(d["c"], d.get("p", 1.0))
    if form == "table":
        if kind == L:
            return l_table(d["knots"], d["slope"])
        return table(d["knots"], d["slope"], kind=kind)
    if form == "exp":
        return exp_decay(d["c"], d["rate"])
    if form == "rational":
        return rational_decay(d["c"], d["p"])
    if form == "compose":
        return compose(from_json(d["outer"]), from_json(d["inner"]))
    if form == "id_plus":
        return id_plus(from_json(d["rho"]))
    if form == "inverse":
        return inverse(from_json(d["of"]))
    raise ValueError(f"unknown comparison-function form {form!r}")
