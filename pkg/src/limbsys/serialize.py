"""JSON wire formats.

Rational-mode numbers travel as decimal strings (``"1/3"``, ``"2"``) so
nothing is lost in transit; float-mode numbers travel as plain JSON numbers,
which round-trip exactly through Python's shortest-repr float formatting.
On input, strings parse to ``Fraction`` and numbers stay native, so a file's
arithmetic is self-describing.  Files written by the command-line tools carry
a ``{"format": "limbsys/1", "kind": ...}`` header.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .limbs import NumberedLimbSystem
from .measures import CostMatrix, Coupling, DiscreteMeasure, Number, PartialMap, is_exact_number

FORMAT = "limbsys/1"


def number_to_json(x: Number) -> Any:
    if is_exact_number(x):
        return str(Fraction(x))
    return float(x)


def number_from_json(v: Any) -> Number:
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(v, int):
        return v
    return float(v)


def measure_to_json(m: DiscreteMeasure) -> dict:
    return {
        "points": list(m.points),
        "weights": [number_to_json(w) for w in m.weights],
    }


def measure_from_json(d: dict) -> DiscreteMeasure:
    return DiscreteMeasure(d["points"], [number_from_json(w) for w in d["weights"]])


def cost_to_json(c: CostMatrix) -> dict:
    return {
        "rows": c.rows,
        "cols": c.cols,
        "entries": [[number_to_json(v) for v in row] for row in c.entries],
    }


def cost_from_json(d: dict) -> CostMatrix:
    c = CostMatrix([[number_from_json(v) for v in row] for row in d["entries"]])
    if c.rows != d["rows"] or c.cols != d["cols"]:
        raise ValueError("cost entries disagree with declared dimensions")
    return c


def coupling_to_json(g: Coupling) -> dict:
    return {
        "rows": g.shape[0],
        "cols": g.shape[1],
        "entries": [[i, j, number_to_json(m)] for i, j, m in g.entries],
    }


def coupling_from_json(d: dict) -> Coupling:
    return Coupling(
        (d["rows"], d["cols"]),
        [(e[0], e[1], number_from_json(e[2])) for e in d["entries"]],
    )


def solution_to_json(sol) -> dict:
    return {
        "arithmetic": "exact" if sol.exact else "float",
        "coupling": coupling_to_json(sol.coupling),
        "q": [number_to_json(v) for v in sol.potentials.q],
        "r": [number_to_json(v) for v in sol.potentials.r],
        "primal_value": number_to_json(sol.primal_value),
        "dual_value": number_to_json(sol.dual_value),
        "zero_set": [[i, j] for i, j in sol.zero_set],
    }


def system_to_json(system: NumberedLimbSystem) -> dict:
    limbs = []
    for k, f in enumerate(system.limbs, start=1):
        limbs.append(
            {
                "k": k,
                "dir": f.direction,
                "map": {str(a): b for a, b in f.assignments},
            }
        )
    classes = {
        f"I{k}": sorted(sites) for k, sites in enumerate(system.classes)
    }
    return {"limbs": limbs, "classes": classes}


def system_from_json(d: dict) -> NumberedLimbSystem:
    raw = sorted(d["limbs"], key=lambda e: e["k"])
    limbs = []
    for want, e in enumerate(raw, start=1):
        if e["k"] != want:
            raise ValueError("limb indices must be consecutive from 1")
        limbs.append(PartialMap(e["dir"], {int(a): int(b) for a, b in e["map"].items()}))
    classes = [d["classes"].get(f"I{k}", []) for k in range(len(limbs) + 1)]
    return NumberedLimbSystem(limbs, classes)


def wrap(kind: str, payload: dict) -> dict:
    out = {"format": FORMAT, "kind": kind}
    out.update(payload)
    return out


def dump(path: str, kind: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(wrap(kind, payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load(path: str, kind: str | None = None) -> dict:
    with open(path) as fh:
        d = json.load(fh)
    if "format" in d and d["format"] != FORMAT:
        raise ValueError(f"unsupported file format {d['format']!r}")
    if kind is not None and d.get("kind", kind) != kind:
        raise ValueError(f"expected a {kind!r} file, found {d.get('kind')!r}")
    return d


def dumps_canonical(obj: Any) -> str:
    """Stable serialization used wherever byte-identical output matters."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
