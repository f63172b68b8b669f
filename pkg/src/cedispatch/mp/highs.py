"""HiGHS backend via scipy, for problems too large for the dense kernel."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpSolution, sensitivity_to_duals
from .problem import EQ, GE, LE, ProblemDef


def _split(p: ProblemDef):
    A = p.matrix()
    b = p.rhs()
    senses = np.array(p.senses())
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if ub_rows.size else None
    b_ub = np.concatenate([b[le], -b[ge]]) if ub_rows.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = b[eq] if eq.size else None
    return A_ub, b_ub, A_eq, b_eq, le, ge, eq


def highs_lp(p: ProblemDef) -> LpSolution:
    c = p.cost()
    if p.maximize:
        c = -c
    lb, ub = p.bounds()
    A_ub, b_ub, A_eq, b_eq, le, ge, eq = _split(p)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lb, ub]), method="highs",
                  options={"presolve": True, "dual_feasibility_tolerance": 1e-10,
                           "primal_feasibility_tolerance": 1e-10})
    if res.status == 2:
        return LpSolution(INFEASIBLE, np.nan, np.zeros(p.n), np.zeros(p.m),
                          np.zeros(p.n), backend="highs")
    if res.status == 3:
        return LpSolution(UNBOUNDED, np.nan, np.zeros(p.n), np.zeros(p.m),
                          np.zeros(p.n), backend="highs")
    if res.status != 0:
        raise RuntimeError(f"HiGHS LP failed: {res.message}")
    y = np.zeros(p.m)
    if le.size or ge.size:
        mu = res.ineqlin.marginals
        y[le] = mu[: le.size]
        y[ge] = -mu[le.size:]
    if eq.size:
        y[eq] = res.eqlin.marginals
    d = res.lower.marginals + res.upper.marginals
    x = res.x
    return LpSolution(OPTIMAL, float(p.cost() @ x) + p.obj_constant, x,
                      sensitivity_to_duals(y, p.senses()), d,
                      int(getattr(res, "nit", 0)), backend="highs")


def highs_milp(p: ProblemDef, abs_gap: float = 1e-6, rel_gap: float = 1e-9,
               time_limit: float | None = None):
    c = p.cost()
    if p.maximize:
        c = -c
    lb, ub = p.bounds()
    A = p.matrix()
    b = p.rhs()
    senses = p.senses()
    lo = np.array([b[i] if s in (GE, EQ) else -np.inf for i, s in enumerate(senses)])
    hi = np.array([b[i] if s in (LE, EQ) else np.inf for i, s in enumerate(senses)])
    integrality = np.array([1 if v.binary else 0 for v in p.variables])
    options = {"mip_rel_gap": rel_gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    cons = [LinearConstraint(A, lo, hi)] if p.m else []
    res = milp(c, constraints=cons, integrality=integrality,
               bounds=Bounds(lb, ub), options=options)
    return res
