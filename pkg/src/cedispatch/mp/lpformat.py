"""CPLEX-LP text dump, for debugging only."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .problem import EQ, GE, LE, ProblemDef

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _nm(s: str) -> str:
    s = _BAD.sub("_", s)
    return s if s and not s[0].isdigit() else "v" + s


def _terms(items) -> str:
    out = []
    for name, a in items:
        out.append(f"{'-' if a < 0 else '+'} {abs(a):.12g} {name}")
    return " ".join(out) if out else "0"


def to_lp_string(p: ProblemDef) -> str:
    names = [_nm(v.name) for v in p.variables]
    lines = [f"\\ {p.name}", "Maximize" if p.maximize else "Minimize"]
    obj = sorted(p.objective.items())
    lines.append(" obj: " + _terms((names[j], a) for j, a in obj))
    lines.append("Subject To")
    op = {LE: "<=", GE: ">=", EQ: "="}
    for con in p.constraints:
        lhs = _terms((names[j], a) for j, a in zip(con.index, con.value))
        lines.append(f" {_nm(con.name)}: {lhs} {op[con.sense]} {con.rhs:.12g}")
    lines.append("Bounds")
    for nm, v in zip(names, p.variables):
        lo = "-inf" if not np.isfinite(v.lb) else f"{v.lb:.12g}"
        hi = "+inf" if not np.isfinite(v.ub) else f"{v.ub:.12g}"
        lines.append(f" {lo} <= {nm} <= {hi}")
    bins = [names[j] for j in p.binaries]
    if bins:
        lines.append("Binary")
        lines.extend(" " + b for b in bins)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(p: ProblemDef, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_lp_string(p))
    return path
