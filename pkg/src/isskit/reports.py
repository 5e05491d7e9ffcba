"""Probe reports and deterministic JSON output.

A probe never proves a property.  ``no_counterexample`` means the sampled
budget found no violation; ``falsified`` always carries a witness that can
be replayed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

NO_COUNTEREXAMPLE = "no_counterexample"
FALSIFIED = "falsified"
HYPOTHESIS_VIOLATION = "hypothesis_violation"
INCONCLUSIVE = "inconclusive"

DISCLAIMER = ("sampled check: 'no_counterexample' is evidence over the sampling "
              "budget, not a proof")


@dataclass
class ProbeReport:
    """Outcome of one sampled check.

    ``property`` is one of ISS, ULS, LIM, ULIM, AG, FC, DISSIPATIVE,
    IMPLICATION, ETC_DECAY, NETWORK_ISS.
    """

    property: str
    verdict: str
    samples_used: int
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def falsified(self) -> bool:
        return self.verdict == FALSIFIED

    @property
    def passed(self) -> bool:
        return self.verdict == NO_COUNTEREXAMPLE

    def to_json(self) -> dict[str, Any]:
        return {"property": self.property, "verdict": self.verdict,
                "samples_used": self.samples_used, "note": DISCLAIMER,
                "witness": self.witness, "details": self.details}


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _enc(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _enc(obj.tolist(), indent, level)
    if hasattr(obj, "to_json"):
        return _enc(obj.to_json(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_enc(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _enc(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``
    (see :func:`decode_float`).
    """
    return _enc(obj, indent, 0) + "\n"


def decode_float(v) -> float:
    """Inverse of the non-finite encoding used by :func:`dumps`."""
    return float(v)


def jsonable(obj):
    """Round-trip ``obj`` through :func:`dumps` semantics into plain Python values."""
    return json.loads(dumps(obj))
