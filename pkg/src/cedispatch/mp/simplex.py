"""Dense bounded-variable primal simplex.

Rows are turned into equalities with one logical (slack) column each:
``a.x + s = b`` with ``s >= 0`` for ``<=`` rows, ``s <= 0`` for ``>=`` rows and
``s = 0`` for equalities. Phase one drives artificial columns to zero, phase
two optimises the real cost. Entering variables are priced by Dantzig's rule
until a run of degenerate pivots is seen, after which Bland's rule takes over
for the remainder of the solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import EQ, GE, LE

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
PHASE1_TOL = 1e-7
DEGENERATE_RUN = 25
REFACTOR_EVERY = 50


class NumericalBreakdown(RuntimeError):
    pass


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray            # structural values
    y: np.ndarray            # d f* / d b  (f = cost being minimised)
    d: np.ndarray            # reduced costs of structural columns
    iterations: int
    basis: np.ndarray


class _Solver:
    def __init__(self, c, A, b, senses, lb, ub):
        m, n = A.shape
        self.m, self.n = m, n
        self.b = np.asarray(b, dtype=float)
        slack_lb = np.array([0.0 if s in (LE, EQ) else -np.inf for s in senses])
        slack_ub = np.array([np.inf if s == LE else 0.0 for s in senses])
        self.M = np.hstack([A, np.eye(m)])
        self.L = np.concatenate([lb, slack_lb])
        self.U = np.concatenate([ub, slack_ub])
        self.c = np.concatenate([c, np.zeros(m)])
        self.iterations = 0
        self.max_iter = 50 * (m + n) + 50

        x = np.zeros(n + m)
        for j in range(n):
            if np.isfinite(lb[j]):
                x[j] = lb[j]
            elif np.isfinite(ub[j]):
                x[j] = ub[j]
        r = self.b - A @ x[:n]
        basis = []
        arts = []
        cols = []
        for i in range(m):
            s = n + i
            if self.L[s] - PRIMAL_TOL <= r[i] <= self.U[s] + PRIMAL_TOL:
                x[s] = r[i]
                basis.append(s)
                continue
            x[s] = min(max(r[i], self.L[s]), self.U[s])
            resid = r[i] - x[s]
            col = np.zeros(m)
            col[i] = 1.0 if resid > 0 else -1.0
            cols.append(col)
            arts.append(n + m + len(arts))
            basis.append(arts[-1])
            x = np.append(x, abs(resid))
        if arts:
            self.M = np.hstack([self.M, np.column_stack(cols)])
            self.L = np.concatenate([self.L, np.zeros(len(arts))])
            self.U = np.concatenate([self.U, np.full(len(arts), np.inf)])
            self.c = np.concatenate([self.c, np.zeros(len(arts))])
        self.x = x
        self.arts = np.array(arts, dtype=np.int64)
        self.basis = np.array(basis, dtype=np.int64)
        self.is_basic = np.zeros(self.M.shape[1], dtype=bool)
        self.is_basic[self.basis] = True
        self._refactor()

    def _refactor(self):
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        nonbasic = ~self.is_basic
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    def _run(self, cost):
        bland = False
        degenerate = 0
        scale = max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        dtol = DUAL_TOL * scale
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalBreakdown(
                    f"simplex exceeded iteration cap {self.max_iter}")
            if since_refactor >= REFACTOR_EVERY:
                self._refactor()
                since_refactor = 0
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            d[self.is_basic] = 0.0
            up = (d < -dtol) & (self.x < self.U - PRIMAL_TOL) & ~self.is_basic
            down = (d > dtol) & (self.x > self.L + PRIMAL_TOL) & ~self.is_basic
            cand = up | down
            if not cand.any():
                return "optimal"
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
            sigma = 1.0 if up[j] else -1.0
            alpha = self.Binv @ self.M[:, j]
            sa = sigma * alpha

            theta = self.U[j] - self.L[j]
            leave = -1
            xb = self.x[self.basis]
            lb_b = self.L[self.basis]
            ub_b = self.U[self.basis]
            lim = np.full(self.m, np.inf)
            dec = (sa > PIVOT_TOL) & np.isfinite(lb_b)
            inc = (sa < -PIVOT_TOL) & np.isfinite(ub_b)
            lim[dec] = (xb[dec] - lb_b[dec]) / sa[dec]
            lim[inc] = (ub_b[inc] - xb[inc]) / (-sa[inc])
            lim = np.maximum(lim, 0.0)
            tmin = lim.min() if self.m else np.inf
            if tmin < theta:
                ties = np.flatnonzero(lim <= tmin + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(alpha[ties]))])
                theta = lim[leave]
            if not np.isfinite(theta):
                return "unbounded"

            self.x[j] += sigma * theta
            self.x[self.basis] -= theta * sa
            if leave >= 0:
                out = self.basis[leave]
                self.x[out] = lb_b[leave] if sa[leave] > 0 else ub_b[leave]
                row = self.Binv[leave] / alpha[leave]
                self.Binv -= np.outer(alpha, row)
                self.Binv[leave] = row
                self.basis[leave] = j
                self.is_basic[out] = False
                self.is_basic[j] = True
                since_refactor += 1
            self.iterations += 1
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0

    def solve(self):
        if self.arts.size:
            phase1 = np.zeros_like(self.c)
            phase1[self.arts] = 1.0
            self._run(phase1)
            self._refactor()
            if self.x[self.arts].sum() > PHASE1_TOL * (1.0 + np.abs(self.b).max()):
                return "infeasible"
            self.U[self.arts] = 0.0
            nb = self.arts[~self.is_basic[self.arts]]
            self.x[nb] = 0.0
        status = self._run(self.c)
        self._refactor()
        return status


def simplex(c, A, b, senses, lb, ub) -> SimplexResult:
    """Minimise ``c.x`` subject to ``A x (senses) b`` and ``lb <= x <= ub``."""
    A = np.asarray(A, dtype=float).reshape(len(b), len(c))
    solver = _Solver(np.asarray(c, float), A, b, list(senses),
                     np.asarray(lb, float), np.asarray(ub, float))
    status = solver.solve()
    n = solver.n
    if status != "optimal":
        return SimplexResult(status, solver.x[:n].copy(), np.zeros(len(b)),
                             np.zeros(n), solver.iterations, solver.basis.copy())
    y = solver.c[solver.basis] @ solver.Binv
    d = solver.c[:n] - y @ solver.M[:, :n]
    return SimplexResult(status, solver.x[:n].copy(), y, d,
                         solver.iterations, solver.basis.copy())
