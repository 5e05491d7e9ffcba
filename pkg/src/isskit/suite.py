"""Built-in systems paired with candidate ISS, ULS and LIM bounds.

Each entry states whether the system is ISS and supplies bounds that are
valid for the ISS examples (derived by hand from the dynamics).  For the
non-ISS examples the same simple candidates are used; at least one of
FC, ULS, LIM must then be falsified.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import comparison as cf
from .dynamics import SystemModel
from .probe import ISSEstimate
from .systems import (bernoulli_counterexample, cubic_decay, etc_integrator_plant,
                      line_network, linear_decay, two_system, unstable_linear)

__all__ = ["SuiteEntry", "builtin_suite"]


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    system: SystemModel
    is_iss: bool
    estimate: ISSEstimate
    uls_sigma: cf.ComparisonFn
    uls_gamma: cf.ComparisonFn
    uls_r: float
    lim_gamma: cf.ComparisonFn


def _exp_estimate(c_beta: float, rate: float, c_gamma: float) -> ISSEstimate:
    return ISSEstimate(cf.kl_product(cf.linear(c_beta), cf.exp_decay(1.0, rate)),
                       cf.linear(c_gamma))


def builtin_suite(network_size: int = 10) -> list[SuiteEntry]:
    """One entry per built-in system."""
    ident = cf.IDENTITY
    # x' = -x^3 + u: |x| <= r/sqrt(1 + r^2 t) + (2|u|)^(1/3), and
    # r/sqrt(1 + r^2 t) <= (r + sqrt r)(1 + t)^(-1/4)
    cube_gain = cf.power(2 ** (1 / 3), 1 / 3)
    cubic_est = ISSEstimate(cf.kl_product(cf.id_plus(cf.power(1.0, 0.5)),
                                          cf.rational_decay(1.0, 0.25)), cube_gain)
    return [
        SuiteEntry("linear_decay", linear_decay(), True, _exp_estimate(1.0, 1.0, 1.0),
                   ident, ident, 1.0, ident),
        SuiteEntry("cubic_decay", cubic_decay(), True, cubic_est, ident, cube_gain, 1.0, cube_gain),
        # |tanh s| <= |s| gives d|x|/dt <= -|x|/2 + |u|
        SuiteEntry("two_system", two_system(), True, _exp_estimate(1.0, 0.5, 2.0),
                   ident, cf.linear(2.0), 1.0, cf.linear(2.0)),
        # max norm: d|x_i|/dt <= -|x_i| + 0.4 |x| + |u|
        SuiteEntry("line_network", line_network(network_size, 0.4), True,
                   _exp_estimate(1.0, 0.6, 1 / 0.6), ident, cf.linear(1 / 0.6), 1.0,
                   cf.linear(1 / 0.6)),
        SuiteEntry("unstable_linear", unstable_linear(), False, _exp_estimate(1.0, 1.0, 1.0),
                   ident, ident, 1.0, ident),
        SuiteEntry("bernoulli_counterexample", bernoulli_counterexample(), False,
                   _exp_estimate(1.0, 1.0, 1.0), ident, ident, 1.0, ident),
        SuiteEntry("etc_integrator_plant", etc_integrator_plant(), False,
                   _exp_estimate(1.0, 1.0, 1.0), ident, ident, 1.0, ident),
    ]
