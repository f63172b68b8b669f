"""Best-first branch and bound over binary variables."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp
from .problem import ProblemDef

INT_TOL = 1e-7
ABS_GAP = 1e-6


class NodeLimitExceeded(RuntimeError):
    def __init__(self, incumbent, bound):
        super().__init__(f"node limit hit: incumbent={incumbent}, bound={bound}")
        self.incumbent = incumbent
        self.bound = bound


@dataclass
class MilpSolution:
    status: str
    objective: float
    x: np.ndarray
    incumbents: list[tuple[int, float]] = field(default_factory=list)
    nodes: int = 0
    backend: str = "native"
    bound: float = np.nan     # proven bound on the optimum, same sense as objective

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def value(self, p: ProblemDef, name: str) -> float:
        return float(self.x[p.var(name)])


def _branch_and_bound(p: ProblemDef, node_limit: int) -> MilpSolution:
    sign = -1.0 if p.maximize else 1.0
    binaries = p.binaries
    base_lb, base_ub = p.bounds()
    best_x, best_f = None, np.inf   # minimisation-form objective
    history: list[tuple[int, float]] = []
    counter = 0
    heap = [(-np.inf, counter, base_lb[binaries].copy(), base_ub[binaries].copy())]
    nodes = 0
    while heap:
        bound, _, nlb, nub = heapq.heappop(heap)
        if bound >= best_f - ABS_GAP:
            continue
        if nodes >= node_limit:
            raise NodeLimitExceeded(
                None if best_x is None else sign * best_f + p.obj_constant,
                sign * bound + p.obj_constant)
        nodes += 1
        q = p.copy()
        for k, j in enumerate(binaries):
            q.variables[j].lb = nlb[k]
            q.variables[j].ub = nub[k]
        sol = solve_lp(q)
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            return MilpSolution(UNBOUNDED, np.nan, sol.x, history, nodes)
        f = sign * (sol.objective - p.obj_constant)
        if f >= best_f - ABS_GAP:
            continue
        xb = sol.x[binaries]
        frac = np.abs(xb - np.round(xb))
        if binaries and frac.max() > INT_TOL:
            # most fractional, ties by lowest variable id
            k = int(np.argmax(frac >= frac.max() - 1e-12))
            for val in (0.0, 1.0):
                clb, cub = nlb.copy(), nub.copy()
                clb[k] = cub[k] = val
                counter += 1
                heapq.heappush(heap, (f, counter, clb, cub))
            continue
        x = sol.x.copy()
        x[binaries] = np.round(xb)
        best_x, best_f = x, f
        history.append((nodes, sign * f + p.obj_constant))
    if best_x is None:
        return MilpSolution(INFEASIBLE, np.nan, np.zeros(p.n), history, nodes)
    obj = sign * best_f + p.obj_constant
    return MilpSolution(OPTIMAL, obj, best_x, history, nodes, bound=obj)


def _highs(p: ProblemDef, time_limit: float | None) -> MilpSolution:
    from .highs import highs_milp

    res = highs_milp(p, time_limit=time_limit)
    if res.status == 2:
        return MilpSolution(INFEASIBLE, np.nan, np.zeros(p.n), backend="highs")
    if res.status == 3:
        return MilpSolution(UNBOUNDED, np.nan, np.zeros(p.n), backend="highs")
    if res.x is None:
        raise RuntimeError(f"HiGHS MILP failed: {res.message}")
    x = np.array(res.x, dtype=float)
    b = p.binaries
    x[b] = np.round(x[b])
    obj = float(p.cost() @ x) + p.obj_constant
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    status = OPTIMAL if res.status == 0 else "time_limit"
    raw = getattr(res, "mip_dual_bound", None)
    if raw is None or not np.isfinite(raw):
        bound = obj
    else:
        bound = (-raw if p.maximize else raw) + p.obj_constant
        # the relative gap target is 1e-9; never report a bound past the incumbent
        bound = max(bound, obj) if p.maximize else min(bound, obj)
    return MilpSolution(status, obj, x, [(nodes, obj)], nodes, backend="highs", bound=bound)


def solve_milp(p: ProblemDef, backend: str = "native", node_limit: int = 100_000,
               time_limit: float | None = None) -> MilpSolution:
    """Minimise (or maximise) over binaries by branch and bound.

    Native nodes are explored best-first; branching picks the most
    fractional binary, lowest id first on ties.
    """
    p.validate()
    if backend == "native":
        return _branch_and_bound(p, node_limit)
    if backend == "highs":
        return _highs(p, time_limit)
    raise ValueError(f"unknown MILP backend {backend!r}")
