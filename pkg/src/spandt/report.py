"""Deterministic JSON reports.

Floats are written with 17 significant digits so a report round-trips
exactly; key order is insertion order, so equal inputs give equal bytes.
"""

from __future__ import annotations

import json
import math

import numpy as np

SCHEMA = 1


def _float(x):
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats
    return s if any(c in s for c in ".en") else s + ".0"


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(val, out, indent, level + 1)
            out.append(",\n" if k + 1 < len(obj) else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            parts = []
            for v in items:
                sub = []
                _emit(v, sub, indent, level + 1)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(items):
            out.append(pad)
            _emit(val, out, indent, level + 1)
            out.append(",\n" if k + 1 < len(items) else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def run_entry(rep, answer=None, reference=None, label=None):
    """Per-input record of a :class:`spandt.qsim.RunReport`."""
    top = sorted(((p, k) for k, p in rep.distribution.items() if k != "ancilla"), reverse=True)[:5]
    return {
        "x": list(rep.x) if label is None else label,
        "success": rep.success,
        "leaf": rep.leaf,
        "answer": answer,
        "reference": reference,
        "correct": answer == reference,
        "top_outcomes": [{"column": k, "probability": p} for p, k in top],
        "ancilla_mass": rep.distribution.get("ancilla", 0.0),
        "counts": {
            "u_applications": rep.u_applications,
            "controlled_u": rep.controlled_u,
            "controlled_u_budget": rep.controlled_u_budget,
            "r_pi_applications": rep.r_pi_applications,
            "oracle_queries": rep.oracle_queries,
            "thm2_reflections": rep.thm2_reflections,
            "flops": rep.flops,
        },
    }


def validate(doc):
    """Minimal schema check for a run report; raises ``ValueError``."""
    need = {"schema": int, "command": str, "parameters": dict, "witness_sizes": dict,
            "kernel": dict, "runs": list, "summary": dict}
    for key, typ in need.items():
        if not isinstance(doc.get(key), typ):
            raise ValueError(f"report field {key!r} missing or not {typ.__name__}")
    if doc["schema"] != SCHEMA:
        raise ValueError(f"unsupported schema {doc['schema']}")
    for r in doc["runs"]:
        for key in ("x", "success", "correct", "counts"):
            if key not in r:
                raise ValueError(f"run entry lacks {key!r}")
    return True
