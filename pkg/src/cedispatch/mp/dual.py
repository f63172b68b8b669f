"""LP dual construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import EQ, GE, INF, LE, ProblemDef, ProblemError


@dataclass
class DualProblem:
    problem: ProblemDef
    row_vars: list[int]          # dual variable per primal row (df*/db_i)
    lower_vars: dict[int, int]   # primal var -> dual of its lower bound
    upper_vars: dict[int, int]   # primal var -> dual of its upper bound


def dualize(p: ProblemDef, row_bounds: dict[int, tuple[float, float]] | None = None) -> DualProblem:
    """Dual of ``min c.x, A x (senses) b, lb <= x <= ub`` as a maximisation.

    Row dual variables are the sensitivities ``df*/db_i`` of the minimisation
    form, so ``>=`` rows get ``y >= 0`` and ``<=`` rows ``y <= 0``.
    ``row_bounds`` may tighten individual row duals with known valid bounds.
    """
    if p.binaries:
        raise ProblemError("dualize needs a continuous problem")
    c = p.cost()
    if p.maximize:
        c = -c
    d = ProblemDef(name=f"dual_{p.name}", maximize=True)
    row_vars = []
    cols: list[dict[int, float]] = [dict() for _ in range(p.n)]
    for i, con in enumerate(p.constraints):
        lo, hi = {GE: (0.0, INF), LE: (-INF, 0.0), EQ: (-INF, INF)}[con.sense]
        if row_bounds and i in row_bounds:
            lo, hi = max(lo, row_bounds[i][0]), min(hi, row_bounds[i][1])
        k = d.add_var(f"y[{con.name}]", lo, hi, obj=con.rhs)
        row_vars.append(k)
        for j, a in zip(con.index, con.value):
            cols[j][k] = a
    lower_vars, upper_vars = {}, {}
    for j, v in enumerate(p.variables):
        if np.isfinite(v.lb) and np.isfinite(v.ub) and v.lb == v.ub:
            k = d.add_var(f"fix[{v.name}]", -INF, INF, obj=v.lb)
            lower_vars[j] = k
            cols[j][k] = 1.0
            continue
        if np.isfinite(v.lb):
            k = d.add_var(f"lb[{v.name}]", 0.0, INF, obj=v.lb)
            lower_vars[j] = k
            cols[j][k] = 1.0
        if np.isfinite(v.ub):
            k = d.add_var(f"ub[{v.name}]", -INF, 0.0, obj=v.ub)
            upper_vars[j] = k
            cols[j][k] = 1.0
    for j in range(p.n):
        d.add_constraint(cols[j], EQ, c[j], name=f"col[{p.variables[j].name}]")
    d.obj_constant = p.obj_constant if not p.maximize else -p.obj_constant
    return DualProblem(d, row_vars, lower_vars, upper_vars)
