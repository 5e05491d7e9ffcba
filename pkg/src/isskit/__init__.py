"""Numerical toolkit for input-to-state stability: comparison functions,
simulation, sampled stability probes, Lyapunov certificates,
event-triggered control and small-gain certification."""

__version__ = "0.1.0"
