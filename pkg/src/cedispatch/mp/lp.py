"""LP entry points and the dual sign convention.

Dual convention (used verbatim by the cut builder): every problem is read in
minimisation form ``f = c.x`` (a maximisation is negated). Row duals are the
Lagrange multipliers of that form, written with each inequality as
``g(x) <= 0``:

* ``<=`` rows multiply ``a.x - b`` and are ``>= 0``;
* ``>=`` rows multiply ``b - a.x`` and are ``>= 0``;
* ``=`` rows multiply ``a.x - b`` and are free.

So a ``<=`` dual is ``-df*/db`` and a ``>=`` dual is ``+df*/db``. Reduced
costs are reported in minimisation form: ``c_j - sum_i (df*/db_i) a_ij``; they
are ``>= 0`` at a lower bound and ``<= 0`` at an upper bound.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .problem import EQ, GE, LE, ProblemDef, ProblemError
from .simplex import NumericalBreakdown, simplex

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"

_recorder: contextvars.ContextVar[list | None] = contextvars.ContextVar(
    "lp_recorder", default=None)


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0
    backend: str = "native"
    fix_duals: dict[int, float] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, p: ProblemDef, name: str) -> float:
        return float(self.x[p.var(name)])

    def dual(self, p: ProblemDef, name: str) -> float:
        return float(self.duals[p.con(name)])


@contextlib.contextmanager
def record_lps():
    """Collect ``(problem, solution)`` for every LP solved inside the block."""
    log: list = []
    token = _recorder.set(log)
    try:
        yield log
    finally:
        _recorder.reset(token)


def sensitivity_to_duals(y: np.ndarray, senses: list[str]) -> np.ndarray:
    """Map ``df*/db`` (minimisation form) to the multiplier convention."""
    sign = np.array([1.0 if s == GE else -1.0 for s in senses])
    return sign * y


def duals_to_sensitivity(duals: np.ndarray, senses: list[str]) -> np.ndarray:
    return sensitivity_to_duals(duals, senses)


def _native(p: ProblemDef) -> LpSolution:
    c = p.cost()
    if p.maximize:
        c = -c
    lb, ub = p.bounds()
    A = p.matrix().toarray()
    res = simplex(c, A, p.rhs(), p.senses(), lb, ub)
    if res.status != OPTIMAL:
        return LpSolution(res.status, np.nan, res.x, np.zeros(p.m),
                          np.zeros(p.n), res.iterations)
    obj = float(p.cost() @ res.x) + p.obj_constant
    return LpSolution(OPTIMAL, obj, res.x, sensitivity_to_duals(res.y, p.senses()),
                      res.d, res.iterations)


def solve_lp(p: ProblemDef, backend: str = "native") -> LpSolution:
    """Solve the continuous relaxation of ``p`` (binaries are treated as [0, 1]).

    Deterministic for a fixed input. Raises :class:`NumericalBreakdown` when
    pivoting exceeds ``50 (m + n)`` iterations.
    """
    p.validate()
    if backend == "native":
        sol = _native(p)
    elif backend == "highs":
        from .highs import highs_lp
        sol = highs_lp(p)
    else:
        raise ValueError(f"unknown LP backend {backend!r}")
    log = _recorder.get()
    if log is not None:
        log.append((p, sol))
    return sol


def fix_and_resolve(p: ProblemDef, fixes: Mapping[int | str, float],
                    backend: str = "native") -> LpSolution:
    """Tighten each fixed variable to ``[v, v]`` and solve.

    ``fix_duals[j]`` is the multiplier of the implied row ``x_j - v = 0``,
    i.e. ``-df*/dv`` in minimisation form (``+dz*/dv`` for a maximisation).
    """
    q = p.copy()
    fixed = {}
    for key, v in fixes.items():
        j = q.var(key) if isinstance(key, str) else int(key)
        if not 0 <= j < q.n:
            raise ProblemError(f"fix references undeclared variable {key!r}")
        var = q.variables[j]
        tol = 1e-9 * (1.0 + abs(v))
        if v < var.lb - tol or v > var.ub + tol:
            raise ProblemError(
                f"fix {var.name}={v} lies outside bounds [{var.lb}, {var.ub}]")
        v = min(max(float(v), var.lb), var.ub)
        var.lb = var.ub = v
        fixed[j] = v
    sol = solve_lp(q, backend=backend)
    if sol.optimal:
        sol.fix_duals = {j: float(-sol.reduced_costs[j]) for j in fixed}
    return sol


__all__ = [
    "LpSolution", "solve_lp", "fix_and_resolve", "record_lps", "NumericalBreakdown",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "LE", "GE", "EQ",
    "sensitivity_to_duals", "duals_to_sensitivity",
]
