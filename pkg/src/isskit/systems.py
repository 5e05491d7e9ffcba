"""Named built-in systems and polynomial right-hand sides built from JSON.

Every model built here carries its JSON ``spec`` so that reports and
witnesses can be replayed from a file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .dynamics import SystemModel

__all__ = [
    "NetworkModel", "Subsystem", "BUILTINS", "system_from_json",
    "linear_decay", "cubic_decay", "unstable_linear", "bernoulli_counterexample",
    "etc_integrator_plant", "two_system", "line_network", "polynomial_system",
]


@dataclass(frozen=True, eq=False)
class Subsystem:
    """One component ``x_i' = f_i(x_i, xbar_i, u_i)`` of an interconnection.

    ``rhs(xi, neighbors, ui)`` receives the neighbor states as a list in the
    order of ``neighbor_dims``.
    """

    state_dim: int
    neighbor_dims: tuple
    input_dim: int
    rhs: Callable
    spec: dict | None = None


@dataclass(frozen=True, eq=False)
class NetworkModel(SystemModel):
    """Truncated interconnection of ``N`` scalar subsystems with finite neighbor sets.

    Out-of-range neighbors are dropped (zero padding) unless the stencil
    wraps around (``boundary="periodic"``).
    """

    N: int = 0
    neighbors: tuple = ()
    subsystem_rhs: Callable | None = None
    coupling: float = 0.0
    boundary: str = "zero"

    def subsystem(self, i: int) -> Subsystem:
        nb = self.neighbors[i]
        f = self.subsystem_rhs
        return Subsystem(1, tuple(1 for _ in nb), 1, lambda xi, xbar, ui: f(xi, xbar, ui),
                         {"network": self.spec, "index": i})


def _spec(name: str, **params) -> dict:
    return {"name": name, **params}


def linear_decay(a: float = 1.0, b: float = 1.0) -> SystemModel:
    """``x' = -a*x + b*u`` (scalar)."""
    return SystemModel(1, 1, lambda x, u: -a * x + b * u, lambda C: a,
                       "linear_decay", spec=_spec("linear_decay", a=a, b=b))


def cubic_decay() -> SystemModel:
    """``x' = -x**3 + u``."""
    return SystemModel(1, 1, lambda x, u: -x ** 3 + u, lambda C: 3 * C * C,
                       "cubic_decay", spec=_spec("cubic_decay"))


def unstable_linear(a: float = 1.0, b: float = 1.0) -> SystemModel:
    """``x' = a*x + b*u`` with ``a > 0``."""
    return SystemModel(1, 1, lambda x, u: a * x + b * u, lambda C: a,
                       "unstable_linear", spec=_spec("unstable_linear", a=a, b=b))


def bernoulli_counterexample() -> SystemModel:
    """``x1' = -x1 + x2*x1**2``, ``x2' = -x2``: both parts are GAS, the coupling is not forward complete."""
    def rhs(x, u):
        return np.array([-x[0] + x[1] * x[0] ** 2, -x[1]])
    return SystemModel(2, 1, rhs, lambda C: 1 + 3 * C * C, "bernoulli_counterexample",
                       spec=_spec("bernoulli_counterexample"))


def etc_integrator_plant(dim: int = 1) -> SystemModel:
    """``x' = u``."""
    return SystemModel(dim, dim, lambda x, u: np.array(u, dtype=float), lambda C: 0.0,
                       "etc_integrator_plant", spec=_spec("etc_integrator_plant", dim=dim))


def two_system(k12: float = 0.5, k21: float = 0.5) -> SystemModel:
    """Feedback pair ``x1' = -x1 + k12*tanh(x2) + u1``, ``x2' = -x2 + k21*tanh(x1) + u2``.

    Each part satisfies the trajectory estimate with ``beta = r*exp(-t)``,
    internal gain ``k*r`` and external gain ``r``.
    """
    def rhs(x, u):
        return np.array([-x[0] + k12 * math.tanh(x[1]) + u[0],
                         -x[1] + k21 * math.tanh(x[0]) + u[1]])
    return SystemModel(2, 2, rhs, lambda C: 1 + max(k12, k21), "two_system",
                       spec=_spec("two_system", k12=k12, k21=k21))


def _neighbor_table(N: int, boundary: str) -> tuple:
    out = []
    for i in range(N):
        if boundary == "periodic":
            nb = sorted({(i - 1) % N, (i + 1) % N} - {i})
        else:
            nb = [j for j in (i - 1, i + 1) if 0 <= j < N]
        out.append(tuple(nb))
    return tuple(out)


def line_network(N: int = 50, coupling: float = 0.4, boundary: str = "zero") -> NetworkModel:
    """``x_i' = -x_i + coupling*max(|x_{i-1}|, |x_{i+1}|) + u_i`` on ``N`` nodes, max-norm.

    ``boundary="zero"`` pads missing neighbors with zero states;
    ``"periodic"`` wraps the chain into a ring.
    """
    if boundary not in ("zero", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    c = float(coupling)

    def rhs(x, u):
        a = np.abs(x)
        if boundary == "periodic":
            left, right = np.roll(a, 1), np.roll(a, -1)
        else:
            left = np.concatenate(([0.0], a[:-1]))
            right = np.concatenate((a[1:], [0.0]))
        return -x + c * np.maximum(left, right) + u

    def sub_rhs(xi, xbar, ui):
        xi = np.atleast_1d(np.asarray(xi, float))
        m = max((float(np.max(np.abs(v))) for v in xbar), default=0.0)
        return -xi + c * m + np.atleast_1d(np.asarray(ui, float))

    return NetworkModel(N, N, rhs, lambda C: 1 + c, "line_network", "max",
                        _spec("line_network", N=N, coupling=c, boundary=boundary),
                        N=N, neighbors=_neighbor_table(N, boundary), subsystem_rhs=sub_rhs,
                        coupling=c, boundary=boundary)


def polynomial_system(state_dim: int, input_dim: int, terms: list) -> SystemModel:
    """Polynomial right-hand side.

    ``terms[i]`` lists the monomials of component ``i`` as dicts
    ``{"coef": c, "x": [exponents...], "u": [exponents...]}``; missing
    exponent lists mean all zeros.
    """
    if len(terms) != state_dim:
        raise ValueError("need one term list per state component")
    coefs, xp, up, owner = [], [], [], []
    for i, comp in enumerate(terms):
        for term in comp:
            coefs.append(float(term["coef"]))
            xe = term.get("x", [0] * state_dim)
            ue = term.get("u", [0] * input_dim)
            if len(xe) != state_dim or len(ue) != input_dim:
                raise ValueError(f"exponent lists of component {i} have the wrong length")
            xp.append(xe)
            up.append(ue)
            owner.append(i)
    coefs = np.array(coefs)
    xp = np.array(xp, dtype=float).reshape(-1, state_dim)
    up = np.array(up, dtype=float).reshape(-1, input_dim)
    owner = np.array(owner, dtype=int)

    def rhs(x, u):
        mon = coefs * np.prod(x ** xp, axis=1) * np.prod(u ** up, axis=1)
        return np.bincount(owner, weights=mon, minlength=state_dim)

    return SystemModel(state_dim, input_dim, rhs, None, "polynomial",
                       spec={"polynomial": {"state_dim": state_dim, "input_dim": input_dim,
                                            "terms": terms}})


BUILTINS: dict[str, tuple[Callable[..., SystemModel], str]] = {
    "linear_decay": (linear_decay, "x' = -a x + b u"),
    "cubic_decay": (cubic_decay, "x' = -x^3 + u"),
    "unstable_linear": (unstable_linear, "x' = a x + b u, a > 0"),
    "bernoulli_counterexample": (bernoulli_counterexample,
                                 "x1' = -x1 + x2 x1^2, x2' = -x2 (not forward complete)"),
    "etc_integrator_plant": (etc_integrator_plant, "x' = u"),
    "two_system": (two_system, "x1' = -x1 + k12 tanh(x2) + u1, x2' = -x2 + k21 tanh(x1) + u2"),
    "line_network": (line_network,
                     "x_i' = -x_i + c max(|x_{i-1}|, |x_{i+1}|) + u_i, N nodes"),
}


def system_from_json(d: dict[str, Any]) -> SystemModel:
    """Build a system from ``{"name": ..., **params}`` or ``{"polynomial": {...}}``."""
    if "polynomial" in d:
        p = d["polynomial"]
        return polynomial_system(p["state_dim"], p["input_dim"], p["terms"])
    name = d.get("name")
    if name not in BUILTINS:
        raise KeyError(f"unknown built-in system {name!r}")
    params = {k: v for k, v in d.items() if k != "name"}
    return BUILTINS[name][0](**params)
