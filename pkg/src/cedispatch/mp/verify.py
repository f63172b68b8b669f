"""Optimality certificate check, written independently of the solvers.

Only the problem data and the reported ``(x, duals, reduced_costs)`` are used;
nothing is taken from solver internals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import EQ, GE, LE, ProblemDef

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-7
SLACK_TOL = 1e-6
GAP_TOL = 1e-6


@dataclass
class Certificate:
    primal_residual: float
    dual_residual: float
    sign_violation: float
    complementarity: float
    duality_gap: float
    primal_objective: float
    dual_objective: float

    @property
    def ok(self) -> bool:
        return (self.primal_residual <= PRIMAL_TOL
                and self.dual_residual <= DUAL_TOL
                and self.sign_violation <= DUAL_TOL
                and self.complementarity <= SLACK_TOL
                and self.duality_gap <= GAP_TOL * (1.0 + abs(self.primal_objective)))


def certify(p: ProblemDef, x, duals, reduced_costs) -> Certificate:
    x = np.asarray(x, dtype=float)
    lam = np.asarray(duals, dtype=float)
    r = np.asarray(reduced_costs, dtype=float)
    c = np.array([p.objective.get(j, 0.0) for j in range(p.n)])
    if p.maximize:
        c = -c
    lb = np.array([v.lb for v in p.variables])
    ub = np.array([v.ub for v in p.variables])

    # row activities and per-row scale, computed straight from the rows
    act = np.zeros(p.m)
    for i, con in enumerate(p.constraints):
        act[i] = float(np.dot(con.value, x[con.index])) if con.index.size else 0.0
    b = np.array([con.rhs for con in p.constraints])
    scale_b = 1.0 + np.abs(b)

    viol = 0.0
    for i, con in enumerate(p.constraints):
        gap = act[i] - b[i]
        if con.sense == LE:
            v = max(gap, 0.0)
        elif con.sense == GE:
            v = max(-gap, 0.0)
        else:
            v = abs(gap)
        viol = max(viol, v / scale_b[i])
    with np.errstate(invalid="ignore"):
        viol = max(viol, float(np.max(np.maximum(lb - x, 0.0) / (1 + np.abs(lb)), initial=0.0)),
                   float(np.max(np.nan_to_num(np.maximum(x - ub, 0.0) / (1 + np.abs(ub))), initial=0.0)))

    # multipliers -> gradient contributions: g_i(x) <= 0 form
    sign_viol = 0.0
    grad = np.zeros(p.n)
    for i, con in enumerate(p.constraints):
        if con.sense == GE:
            grad[con.index] -= lam[i] * con.value
            sign_viol = max(sign_viol, -lam[i])
        else:
            grad[con.index] += lam[i] * con.value
            if con.sense == LE:
                sign_viol = max(sign_viol, -lam[i])
    # stationarity: c + sum lam_i grad g_i - r = 0
    scale_c = 1.0 + np.abs(c)
    dual_res = float(np.max(np.abs(c + grad - r) / scale_c, initial=0.0))

    comp = 0.0
    dual_obj = 0.0
    for i, con in enumerate(p.constraints):
        slack = act[i] - b[i]
        if con.sense != EQ:
            comp = max(comp, abs(lam[i] * slack) / scale_b[i])
        dual_obj += -lam[i] * b[i] if con.sense != GE else lam[i] * b[i]
    for j in range(p.n):
        if r[j] > DUAL_TOL * scale_c[j]:
            if not np.isfinite(lb[j]):
                sign_viol = max(sign_viol, r[j] / scale_c[j])
                continue
            comp = max(comp, abs(r[j] * (x[j] - lb[j])) / (1 + abs(lb[j])))
            dual_obj += r[j] * lb[j]
        elif r[j] < -DUAL_TOL * scale_c[j]:
            if not np.isfinite(ub[j]):
                sign_viol = max(sign_viol, -r[j] / scale_c[j])
                continue
            comp = max(comp, abs(r[j] * (ub[j] - x[j])) / (1 + abs(ub[j])))
            dual_obj += r[j] * ub[j]
        elif np.isfinite(lb[j]) and abs(x[j] - lb[j]) <= 1e-9 * (1 + abs(lb[j])):
            dual_obj += r[j] * lb[j]
        elif np.isfinite(ub[j]) and abs(x[j] - ub[j]) <= 1e-9 * (1 + abs(ub[j])):
            dual_obj += r[j] * ub[j]
        else:
            dual_obj += r[j] * x[j]
    primal_obj = float(c @ x)
    return Certificate(viol, dual_res, sign_viol, comp, abs(primal_obj - dual_obj),
                       primal_obj, dual_obj)


def verify_solution(p: ProblemDef, sol) -> Certificate:
    return certify(p, sol.x, sol.duals, sol.reduced_costs)
