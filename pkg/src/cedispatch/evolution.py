"""Causal replay of intraday operation under fixed day-ahead decisions.

Each period is one LP that sees only that period's renewable output and the
state left by the previous period (generator outputs and state of charge).
The per-period LP keeps generator limits, ramp limits and the curtailment
fixing as explicit rows so their multipliers can be read back.

Multiplier signs follow :mod:`cedispatch.mp.lp`. The bundle stores them as
sensitivities of the period cost to the first-stage quantity they couple to:

* ``alpha_minus = -mu(p <= p_max x)`` and ``alpha_plus = mu(p >= p_min x)``;
* ``beta_plus = mu(ramp-down row)`` and ``beta_minus = mu(ramp-up row)``;
* ``gamma_minus = -mu(row tying curtailment to its capacity)``, i.e. the
  derivative of the period cost in that capacity, and ``gamma_plus`` the
  multiplier of ``p_c >= 0``.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mp
from .dispatch import DayAheadDecision, RecourseDecision, frequency_row_terms
from .model import SystemSpec

log = logging.getLogger(__name__)

FIX_EQUALITY = "fix-equality"
CAP_BOUND = "cap-bound"
MODES = (FIX_EQUALITY, CAP_BOUND)


@dataclass
class PeriodState:
    p_prev: np.ndarray      # (G,) MW
    soc_prev: np.ndarray    # (S,) MWh

    @classmethod
    def initial(cls, spec: SystemSpec) -> "PeriodState":
        p0 = np.array([g.p_min for g in spec.generators]) * spec.initial_on()
        return cls(p0.astype(float), np.array([e.e_init for e in spec.storages], dtype=float))


@dataclass
class DualBundle:
    alpha_minus: np.ndarray   # (G,)
    alpha_plus: np.ndarray
    beta_plus: np.ndarray
    beta_minus: np.ndarray
    gamma_minus: np.ndarray   # (C,)
    gamma_plus: np.ndarray

    def is_zero(self, tol: float = 1e-12) -> bool:
        return all(np.all(np.abs(getattr(self, k)) <= tol) for k in
                   ("alpha_minus", "alpha_plus", "beta_plus", "beta_minus", "gamma_minus"))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("alpha_minus", "alpha_plus", "beta_plus", "beta_minus", "gamma_minus", "gamma_plus")}


@dataclass
class PeriodLp:
    problem: mp.ProblemDef
    p_g: list[int]
    p_ch: list[int]
    p_dc: list[int]
    soc: list[int]
    p_b: list[int]
    p_c: list[int]
    s_plus: int
    s_minus: int
    s_end: int | None
    fixes: dict[int, float]


@dataclass
class EvolutionResult:
    scenario: int
    lpun: np.ndarray             # (T,) $
    duals: list[DualBundle | None]
    recourse: RecourseDecision
    terminal_shortfall: np.ndarray   # (S,) MWh below initial state of charge
    period_cost: np.ndarray
    certified: np.ndarray        # (T,) bool
    lpun_tol: float
    status: str = "ok"
    error: str = ""
    problems: list = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> np.ndarray:
        return self.lpun <= self.lpun_tol

    @property
    def imbalance(self) -> np.ndarray:
        return self.recourse.s_plus + self.recourse.s_minus

    def to_csv(self, path, spec: SystemSpec) -> None:
        rec = self.recourse
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lpun", "s_plus", "s_minus"]
                       + [f"soc_{e.id}" for e in spec.storages]
                       + [f"p_{g.id}" for g in spec.generators])
            for t in range(spec.n_periods):
                w.writerow([t + 1] + [f"{v:.6f}" for v in
                                      [self.lpun[t], rec.s_plus[t], rec.s_minus[t],
                                       *rec.soc[:, t], *rec.p_g[:, t]]])


def build_period_lp(spec: SystemSpec, hps, fixed: DayAheadDecision, scenario, t: int,
                    state: PeriodState, mode: str = FIX_EQUALITY) -> PeriodLp:
    """Period ``t`` (1-based) LP. ``scenario`` is the (R, T) renewable output;
    only column ``t`` is read."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    k = t - 1
    T = spec.n_periods
    x = fixed.x[:, k]
    x_prev = fixed.x[:, k - 1] if k > 0 else spec.initial_on()
    p = mp.ProblemDef(name=f"period[{t}]")
    lp = PeriodLp(p, [], [], [], [], [], [], -1, -1, None, {})
    for g, gen in enumerate(spec.generators):
        j = p.add_var(f"p[{gen.id}]", -mp.INF, mp.INF, obj=gen.cost_energy)
        lp.p_g.append(j)
        p.add_constraint({j: 1.0}, mp.GE, gen.p_min * x[g], f"genlo[{gen.id}]")
        p.add_constraint({j: 1.0}, mp.LE, gen.p_max * x[g], f"genup[{gen.id}]")
        prev = float(state.p_prev[g])
        # prev - p <= RD x + p_max (1 - x)
        p.add_constraint({j: -1.0}, mp.LE,
                         gen.p_max - (gen.p_max - gen.ramp_down) * x[g] - prev, f"rampdn[{gen.id}]")
        # p - prev <= RU x_prev + p_max (1 - x_prev)
        p.add_constraint({j: 1.0}, mp.LE,
                         gen.p_max - (gen.p_max - gen.ramp_up) * x_prev[g] + prev, f"rampup[{gen.id}]")
    for e, st in enumerate(spec.storages):
        ch = p.add_var(f"pch[{st.id}]", 0.0, st.p_max, obj=st.cost_throughput)
        dc = p.add_var(f"pdc[{st.id}]", 0.0, st.p_max, obj=st.cost_throughput)
        soc = p.add_var(f"soc[{st.id}]", st.e_min, st.e_max)
        lp.p_ch.append(ch)
        lp.p_dc.append(dc)
        lp.soc.append(soc)
        p.add_constraint({soc: 1.0, ch: -st.eta_ch, dc: 1.0 / st.eta_dc}, mp.EQ,
                         float(state.soc_prev[e]), f"soc_bal[{st.id}]")
        if t == T:
            if lp.s_end is None:
                lp.s_end = p.add_var("s_end", 0.0, mp.INF, obj=spec.punish_price)
            p.add_constraint({soc: 1.0, lp.s_end: 1.0}, mp.GE, st.e_init, f"soc_end[{st.id}]")
    for b, f in enumerate(spec.fqr_loads):
        j = p.add_var(f"pb[{f.id}]", 0.0, mp.INF)
        lp.p_b.append(j)
        p.add_constraint({j: 1.0}, mp.LE, float(fixed.fqr_cap[b, k]), f"fqr[{f.id}]")
        lp.fixes[j] = float(fixed.fqr_cap[b, k])
    for c, cl in enumerate(spec.cl_loads):
        j = p.add_var(f"pc[{cl.id}]", -mp.INF, mp.INF)
        lp.p_c.append(j)
        p.add_constraint({j: 1.0}, mp.GE, 0.0, f"cllo[{cl.id}]")
        sense = mp.EQ if mode == FIX_EQUALITY else mp.LE
        p.add_constraint({j: 1.0}, sense, float(fixed.cl_cap[c, k]), f"cl[{cl.id}]")
    lp.s_plus = p.add_var("splus", 0.0, mp.INF, obj=spec.punish_price)
    lp.s_minus = p.add_var("sminus", 0.0, mp.INF, obj=spec.punish_price)
    row = {j: 1.0 for j in lp.p_g}
    row.update({j: 1.0 for j in lp.p_dc})
    row.update({j: -1.0 for j in lp.p_ch})
    row.update({j: 1.0 for j in lp.p_c})
    row[lp.s_plus] = 1.0
    row[lp.s_minus] = -1.0
    renewable = float(np.asarray(scenario, dtype=float)[:, k].sum()) if len(spec.renewables) else 0.0
    p.add_constraint(row, mp.EQ, float(spec.total_demand()[k]) - renewable, "bal")
    dp = float(spec.delta_p_series()[k])
    for hp in hps.planes:
        w, const = frequency_row_terms(spec, hp)
        p.add_constraint({j: 1.0 for j in lp.p_b}, mp.GE,
                         dp - const - float(w @ x), f"freq[{hp.id}]")
    return lp


def _bundle(spec: SystemSpec, p: mp.ProblemDef, sol: mp.LpSolution) -> DualBundle:
    def d(prefix, ids):
        return np.array([sol.dual(p, f"{prefix}[{i}]") for i in ids])
    gids = [g.id for g in spec.generators]
    cids = [c.id for c in spec.cl_loads]
    return DualBundle(-d("genup", gids), d("genlo", gids), d("rampdn", gids), d("rampup", gids),
                      -d("cl", cids), d("cllo", cids))


def evolve_scenario(spec: SystemSpec, hps, fixed: DayAheadDecision, scenario, index: int = 0,
                    mode: str = FIX_EQUALITY, keep_problems: bool = False) -> EvolutionResult:
    """Forward sequence of period LPs, threading outputs and state of charge."""
    values = np.asarray(getattr(scenario, "values", scenario), dtype=float)
    G, T = spec.n_gen, spec.n_periods
    S, B, C = len(spec.storages), len(spec.fqr_loads), len(spec.cl_loads)
    rec = RecourseDecision(np.zeros((G, T)), values.copy(), np.zeros((S, T)), np.zeros((S, T)),
                           np.zeros((S, T)), np.zeros((B, T)), np.zeros((C, T)),
                           np.zeros(T), np.zeros(T))
    res = EvolutionResult(index, np.zeros(T), [None] * T, rec, np.zeros(S), np.zeros(T),
                          np.zeros(T, dtype=bool), spec.lpun_tol)
    state = PeriodState.initial(spec)
    for t in range(1, T + 1):
        k = t - 1
        lp = build_period_lp(spec, hps, fixed, values, t, state, mode)
        try:
            sol = mp.fix_and_resolve(lp.problem, lp.fixes)
        except (mp.NumericalBreakdown, mp.ProblemError) as exc:
            res.status, res.error = "errored", f"period {t}: {exc}"
            log.error("scenario %d %s", index, res.error)
            return res
        if not sol.optimal:
            res.status, res.error = "errored", f"period {t}: LP {sol.status}"
            log.error("scenario %d %s", index, res.error)
            return res
        x = sol.x
        rec.p_g[:, k] = x[lp.p_g]
        rec.p_ch[:, k] = x[lp.p_ch]
        rec.p_dc[:, k] = x[lp.p_dc]
        rec.soc[:, k] = x[lp.soc]
        rec.p_b[:, k] = x[lp.p_b]
        rec.p_c[:, k] = x[lp.p_c]
        rec.s_plus[k] = x[lp.s_plus]
        rec.s_minus[k] = x[lp.s_minus]
        if lp.s_end is not None:
            res.terminal_shortfall[:] = np.maximum(
                0.0, np.array([e.e_init for e in spec.storages]) - rec.soc[:, k])
        res.lpun[k] = spec.punish_price * (rec.s_plus[k] + rec.s_minus[k])
        res.period_cost[k] = sol.objective
        res.duals[k] = _bundle(spec, lp.problem, sol)
        q = lp.problem.copy()
        for j, v in lp.fixes.items():
            q.variables[j].lb = q.variables[j].ub = v
        res.certified[k] = mp.certify(q, sol.x, sol.duals, sol.reduced_costs).ok
        if keep_problems:
            res.problems.append((lp, sol))
        state = PeriodState(rec.p_g[:, k].copy(), rec.soc[:, k].copy())
    return res


def _evolve_job(args):
    return evolve_scenario(*args)


def evolve_all(spec: SystemSpec, hps, fixed: DayAheadDecision, scenarios,
               mode: str = FIX_EQUALITY, jobs: int = 1) -> list[EvolutionResult]:
    """Evolve every scenario; results come back in scenario order."""
    tasks = [(spec, hps, fixed, sc, i, mode) for i, sc in enumerate(scenarios)]
    if jobs <= 1 or len(tasks) <= 1:
        return [_evolve_job(a) for a in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evolve_job, tasks))


@dataclass
class InfeasibleEntry:
    scenario: int
    t: int                 # 1-based
    lpun: float
    duals: DualBundle


def collect_infeasible(results, lpun_tol: float | None = None) -> list[InfeasibleEntry]:
    """All (scenario, period) with punish cost above tolerance, largest first."""
    out = []
    for r in results:
        tol = r.lpun_tol if lpun_tol is None else lpun_tol
        for k in np.flatnonzero(r.lpun > tol):
            out.append(InfeasibleEntry(r.scenario, int(k) + 1, float(r.lpun[k]), r.duals[k]))
    out.sort(key=lambda e: (-e.lpun, e.scenario, e.t))
    return out


def average_imbalance(results, n_periods: int) -> np.ndarray:
    if not results:
        return np.zeros(n_periods)
    return np.mean([r.imbalance for r in results], axis=0)


def write_results(results, spec: SystemSpec, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in results:
        path = out / f"evolution_{r.scenario:03d}.csv"
        r.to_csv(path, spec)
        paths.append(path)
    return paths
