"""Two-stage robust day-ahead schedule by column-and-constraint generation.

The master holds the first stage plus one operating-stage copy per enumerated
renewable scenario, with an epigraph variable for the worst copy. The
adversary maximises the operating cost over the forecast box: the operating
LP is dualised, the renewable outputs sit only in the balance right-hand
sides, and each (r, t) picks a box vertex through two binaries whose product
with the balance dual is linearised with a big-M.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mp
from .dispatch import (
    DayAheadDecision, RecourseDecision, build_first_stage, build_recourse,
)
from .model import SystemSpec

log = logging.getLogger(__name__)

LP_BACKEND = "highs"
MILP_BACKEND = "highs"


class MasterInfeasible(RuntimeError):
    def __init__(self, cut_ids: list[int]):
        super().__init__(f"master problem infeasible; correction rows involved: {cut_ids}")
        self.cut_ids = cut_ids


class BigMError(RuntimeError):
    pass


class CcgNotConverged(RuntimeError):
    def __init__(self, state: "CcgState"):
        super().__init__(f"C&CG not converged after {state.iteration} iterations "
                         f"(LB={state.lb:.6g}, UB={state.ub:.6g})")
        self.state = state


@dataclass(frozen=True)
class ScenarioVertex:
    signs: np.ndarray        # (R, T) in {-1, 0, +1}
    values: np.ndarray       # (R, T) MW

    @classmethod
    def expected(cls, spec: SystemSpec) -> "ScenarioVertex":
        e = spec.renewable_expected()
        return cls(np.zeros(e.shape, dtype=int), e.copy())

    @classmethod
    def from_signs(cls, spec: SystemSpec, signs) -> "ScenarioVertex":
        signs = np.asarray(signs, dtype=int)
        return cls(signs, spec.renewable_expected() + signs * spec.renewable_half_width())

    @property
    def deviations(self) -> int:
        return int(np.count_nonzero(self.signs))

    def key(self) -> tuple:
        return tuple(self.signs.ravel().tolist())

    def __eq__(self, other):
        return isinstance(other, ScenarioVertex) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass
class CcgState:
    iteration: int = 0
    lb: float = -np.inf
    ub: float = np.inf
    scenarios: list[ScenarioVertex] = field(default_factory=list)
    incumbent: DayAheadDecision | None = None
    history: list[dict] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.ub - self.lb


# -- operating-stage evaluation ------------------------------------------------

def recourse_solve(spec: SystemSpec, hps, decision: DayAheadDecision, values,
                   backend: str = LP_BACKEND) -> tuple[float, RecourseDecision]:
    """Optimal operating cost for a fixed first stage and renewable outputs."""
    p = mp.ProblemDef(name="recourse")
    rv = build_recourse(spec, hps, p, decision, scenario=np.asarray(values, dtype=float))
    sol = mp.solve_lp(p, backend=backend)
    if not sol.optimal:
        raise RuntimeError(f"operating-stage LP {sol.status}")
    return sol.objective, rv.decision(sol.x, values)


# -- master --------------------------------------------------------------------

def master_problem(spec: SystemSpec, hps, cuts, scenarios) -> tuple[mp.ProblemDef, object, list]:
    p, fv = build_first_stage(spec, cuts)
    p.name = "master"
    eta = p.add_var("eta", 0.0, mp.INF, obj=1.0)
    copies = []
    for k, sc in enumerate(scenarios):
        rv = build_recourse(spec, hps, p, fv, scenario=sc.values, tag=f"k{k}:", objective=False)
        row = {eta: 1.0}
        for j, c in rv.cost.items():
            row[j] = row.get(j, 0.0) - c
        p.add_constraint(row, mp.GE, 0.0, f"epi[{k}]")
        copies.append(rv)
    return p, fv, copies


def master_solve(spec: SystemSpec, hps, cuts, scenarios) -> tuple[DayAheadDecision, float, mp.MilpSolution]:
    """Returns the first stage, a proven lower bound, and the raw MILP solution.

    The expected scenario is always included.
    """
    scenarios = _with_expected(spec, scenarios)
    p, fv, _ = master_problem(spec, hps, cuts, scenarios)
    sol = mp.solve_milp(p, backend=MILP_BACKEND)
    if sol.status == mp.INFEASIBLE:
        raise MasterInfeasible(sorted(c.id for c in cuts))
    if not sol.optimal:
        raise RuntimeError(f"master MILP {sol.status}")
    return fv.decision(sol.x), float(sol.bound), sol


def _with_expected(spec: SystemSpec, scenarios) -> list[ScenarioVertex]:
    exp = ScenarioVertex.expected(spec)
    out = [exp]
    for s in scenarios:
        if s not in out:
            out.append(s)
    return out


# -- adversary -----------------------------------------------------------------

def subproblem_problem(spec: SystemSpec, hps, fixed: DayAheadDecision, big_m: float | None = None):
    """Dualised operating LP with vertex binaries; returns the MILP and lookups."""
    p = mp.ProblemDef(name="operating")
    expected = spec.renewable_expected()
    rv = build_recourse(spec, hps, p, fixed, scenario=expected)
    big_m = 2.0 * spec.punish_price if big_m is None else big_m
    bal = [int(i) for i in rv.balance_rows]
    dual = mp.dualize(p, row_bounds={i: (-big_m, big_m) for i in bal})
    d = dual.problem
    d.name = "adversary"
    h = spec.renewable_half_width()
    R, T = h.shape
    v_up = np.full((R, T), -1)
    v_dn = np.full((R, T), -1)
    used = []
    for r in range(R):
        for t in range(T):
            if h[r, t] <= 0:
                continue
            y = dual.row_vars[bal[t]]
            for sgn, store in ((1.0, v_up), (-1.0, v_dn)):
                tag = "up" if sgn > 0 else "dn"
                v = d.add_var(f"v{tag}[{r},{t + 1}]", binary=True)
                w = d.add_var(f"w{tag}[{r},{t + 1}]", -big_m, big_m)
                # y * v with |y| <= M, v binary
                d.add_constraint({w: 1.0, v: -big_m}, mp.LE, 0.0)
                d.add_constraint({w: 1.0, v: big_m}, mp.GE, 0.0)
                d.add_constraint({w: 1.0, y: -1.0, v: big_m}, mp.LE, big_m)
                d.add_constraint({w: 1.0, y: -1.0, v: -big_m}, mp.GE, -big_m)
                # balance rhs is demand - sum p_r, so p_r = e + sgn h v adds -sgn h y v
                d.objective[w] = d.objective.get(w, 0.0) - sgn * h[r, t]
                store[r, t] = v
            d.add_constraint({int(v_up[r, t]): 1.0, int(v_dn[r, t]): 1.0}, mp.LE, 1.0,
                             f"one_side[{r},{t + 1}]")
            used.append((r, t))
    if spec.uncertainty_budget is not None and used:
        row = {}
        for r, t in used:
            row[int(v_up[r, t])] = 1.0
            row[int(v_dn[r, t])] = 1.0
        d.add_constraint(row, mp.LE, float(spec.uncertainty_budget), "budget")
    return d, dual, v_up, v_dn, bal, big_m


def subproblem_solve(spec: SystemSpec, hps, fixed: DayAheadDecision,
                     big_m: float | None = None) -> tuple[ScenarioVertex, float]:
    """Worst box vertex for ``fixed`` and its operating cost."""
    d, dual, v_up, v_dn, bal, big_m = subproblem_problem(spec, hps, fixed, big_m)
    sol = mp.solve_milp(d, backend=MILP_BACKEND)
    if not sol.optimal:
        raise RuntimeError(f"adversarial MILP {sol.status}")
    ys = sol.x[[dual.row_vars[i] for i in bal]]
    if np.any(np.abs(ys) >= big_m * (1 - 1e-9)):
        raise BigMError(f"balance dual reached the big-M bound {big_m}; increase it")
    signs = np.zeros(v_up.shape, dtype=int)
    mask = v_up >= 0
    signs[mask] = np.rint(sol.x[v_up[mask]]).astype(int) - np.rint(sol.x[v_dn[mask]]).astype(int)
    vertex = ScenarioVertex.from_signs(spec, signs)
    value, _ = recourse_solve(spec, hps, fixed, vertex.values)
    if abs(value - sol.objective) > 1e-6 * (1 + abs(value)):
        log.warning("adversary value %.9g differs from re-solved operating cost %.9g",
                    sol.objective, value)
    return vertex, value


# -- loop ----------------------------------------------------------------------

def ccg_loop(spec: SystemSpec, hps, cuts=(), seed_scenarios=(),
             max_iters: int | None = None) -> tuple[DayAheadDecision, list[ScenarioVertex], CcgState]:
    """Alternate master and adversary until the bounds meet.

    ``seed_scenarios`` pre-populates the master (used when re-solving after
    correction rows are added). The returned scenario list holds every vertex
    the adversary produced, in order of discovery.
    """
    max_iters = spec.ccg_max_iters if max_iters is None else max_iters
    state = CcgState(scenarios=_with_expected(spec, seed_scenarios))
    found: list[ScenarioVertex] = [s for s in seed_scenarios]
    for k in range(1, max_iters + 1):
        state.iteration = k
        decision, bound, _ = master_solve(spec, hps, cuts, state.scenarios)
        state.lb = max(state.lb, bound)
        vertex, worst = subproblem_solve(spec, hps, decision)
        total = decision.first_stage_cost(spec) + worst
        if total < state.ub:
            state.ub = total
            state.incumbent = decision
        if vertex not in found:
            found.append(vertex)
        state.history.append({"iteration": k, "lb": state.lb, "ub": state.ub,
                              "scenarios": len(state.scenarios),
                              "worst_operating_cost": worst})
        log.info("C&CG %d: LB=%.6f UB=%.6f", k, state.lb, state.ub)
        if state.ub - state.lb <= spec.ccg_gap_tol * (1 + abs(state.ub)):
            return state.incumbent, found, state
        if vertex in state.scenarios:
            # the worst vertex is already in the master, so its bound is tight
            state.lb = max(state.lb, state.ub)
            return state.incumbent, found, state
        state.scenarios.append(vertex)
    raise CcgNotConverged(state)


def deterministic_uc(spec: SystemSpec, hps, cuts=()) -> tuple[DayAheadDecision, float]:
    """Single-scenario model at the expected renewable output."""
    p, fv = build_first_stage(spec, cuts)
    p.name = "deterministic"
    build_recourse(spec, hps, p, fv, scenario=spec.renewable_expected())
    sol = mp.solve_milp(p, backend=MILP_BACKEND)
    if not sol.optimal:
        raise RuntimeError(f"deterministic MILP {sol.status}")
    return fv.decision(sol.x), sol.objective


# -- export --------------------------------------------------------------------

def export_scenarios(spec: SystemSpec, scenarios, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, sc in enumerate(scenarios):
        name = f"scenario_{i:03d}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["renewable", "t", "sign", "value"])
            for r, ren in enumerate(spec.renewables):
                for t in range(spec.n_periods):
                    w.writerow([ren.id, t + 1, int(sc.signs[r, t]), f"{sc.values[r, t]:.6f}"])
        files.append(name)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"n_scenarios": len(files), "files": files,
                                    "renewables": [r.id for r in spec.renewables],
                                    "n_periods": spec.n_periods}, indent=2))
    return manifest


def load_scenarios(spec: SystemSpec, in_dir) -> list[ScenarioVertex]:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    ids = [r.id for r in spec.renewables]
    if manifest.get("renewables") != ids or manifest.get("n_periods") != spec.n_periods:
        raise ValueError("scenario set does not match the system's renewables or horizon")
    out = []
    for name in manifest["files"]:
        signs = np.zeros((len(ids), spec.n_periods), dtype=int)
        values = np.full((len(ids), spec.n_periods), np.nan)
        with open(src / name, newline="") as fh:
            for row in csv.DictReader(fh):
                r, t = ids.index(row["renewable"]), int(row["t"]) - 1
                signs[r, t] = int(row["sign"])
                values[r, t] = float(row["value"])
        if np.isnan(values).any():
            raise ValueError(f"{name}: missing (renewable, period) entries")
        out.append(ScenarioVertex(signs, values))
    return out
