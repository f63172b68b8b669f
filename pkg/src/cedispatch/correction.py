"""Correction rows from evolution multipliers and the outer dispatch loop.

A row built from period t of scenario i reads

    sum_g G_g (x_g,t - xhat_g,t) + sum_c Gamma_c (cap_c,t - caphat_c,t) <= -Lpun

with ``G_g = alpha_minus p_max + alpha_plus p_min + beta_plus (p_max - RD)
+ beta_minus (p_max - RU)`` and ``Gamma_c = gamma_minus``. All multipliers are
cost sensitivities (see :mod:`cedispatch.evolution`), so G_g and Gamma_c
estimate how the period's punish cost moves with each first-stage quantity;
the row asks the next schedule to cancel the observed punish cost. At the
schedule that produced it the left side is 0, so the row always cuts it off.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import evolution, robust
from .dispatch import DayAheadDecision
from .evolution import DualBundle, InfeasibleEntry
from .model import SystemSpec
from .relax import HyperplaneSet, algorithm1

log = logging.getLogger(__name__)


class DegenerateCut(ValueError):
    pass


@dataclass
class Cut:
    id: int
    t: int                    # 1-based period
    scenario: int
    outer_iter: int
    gen_coef: np.ndarray      # (G,)
    x_hat: np.ndarray         # (G,)
    cl_coef: np.ndarray       # (C,)
    cap_hat: np.ndarray       # (C,)
    rhs: float                # -Lpun
    duals: DualBundle
    flagged: bool = False

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.t, self.scenario, self.outer_iter)

    def lhs(self, decision: DayAheadDecision) -> float:
        k = self.t - 1
        val = float(self.gen_coef @ (decision.x[:, k] - self.x_hat))
        if len(self.cl_coef):
            val += float(self.cl_coef @ (decision.cl_cap[:, k] - self.cap_hat))
        return val

    def violated_by(self, decision: DayAheadDecision) -> bool:
        return self.lhs(decision) > self.rhs

    def to_dict(self) -> dict:
        return {"id": self.id, "t": self.t, "scenario": self.scenario,
                "outer_iter": self.outer_iter, "gen_coef": self.gen_coef.tolist(),
                "x_hat": self.x_hat.tolist(), "cl_coef": self.cl_coef.tolist(),
                "cap_hat": self.cap_hat.tolist(), "rhs": self.rhs, "flagged": self.flagged,
                "duals": self.duals.to_dict()}


@dataclass
class CutSet:
    cuts: list[Cut] = field(default_factory=list)

    def __iter__(self):
        return iter(self.cuts)

    def __len__(self) -> int:
        return len(self.cuts)

    def keys(self) -> set:
        return {c.key for c in self.cuts}

    def add(self, cut: Cut) -> None:
        if cut.key in self.keys():
            raise ValueError(f"duplicate cut key {cut.key}")
        self.cuts.append(cut)

    def next_id(self) -> int:
        return len(self.cuts) + 1


def build_cut(entry: InfeasibleEntry, fixed: DayAheadDecision, spec: SystemSpec,
              cut_id: int = 1, outer_iter: int = 0) -> Cut:
    d = entry.duals
    k = entry.t - 1
    pmax = np.array([g.p_max for g in spec.generators])
    pmin = np.array([g.p_min for g in spec.generators])
    rd = np.array([g.ramp_down for g in spec.generators])
    ru = np.array([g.ramp_up for g in spec.generators])
    coef = (d.alpha_minus * pmax + d.alpha_plus * pmin
            + d.beta_plus * (pmax - rd) + d.beta_minus * (pmax - ru))
    cl = np.asarray(d.gamma_minus, dtype=float)
    if np.all(np.abs(coef) <= 1e-12) and np.all(np.abs(cl) <= 1e-12):
        raise DegenerateCut(f"all multipliers zero at t={entry.t}, scenario {entry.scenario} "
                            f"with punish cost {entry.lpun}")
    x_hat = fixed.x[:, k].astype(float)
    cut = Cut(cut_id, entry.t, entry.scenario, outer_iter, coef, x_hat, cl,
              fixed.cl_cap[:, k].astype(float), -float(entry.lpun), d)
    # committing an offline unit should not be predicted to raise punish cost
    off = x_hat < 0.5
    if np.any(coef[off] > 1e-9):
        cut.flagged = True
        log.warning("cut %d (t=%d): positive coefficient on an offline unit %s",
                    cut_id, entry.t, coef[off])
    return cut


@dataclass
class OuterIteration:
    index: int
    lb: float
    ub: float
    n_scenarios: int
    ccg_iterations: int
    cuts_added: int
    max_lpun: float
    avg_imbalance: np.ndarray
    seconds: float


@dataclass
class OuterResult:
    decision: DayAheadDecision
    hyperplanes: HyperplaneSet
    cuts: CutSet
    scenarios: list
    iterations: list[OuterIteration]
    first_evolution: list
    last_evolution: list
    closed: bool
    ccg_states: list = field(default_factory=list)
    decisions: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "closed" if self.closed else "not-closed"

    def report(self) -> str:
        lines = [f"status: {self.status}",
                 f"hyperplanes: {self.hyperplanes.n_hp}  cuts: {len(self.cuts)}  "
                 f"scenarios: {len(self.scenarios)}",
                 "iter  LB              UB              |W|  ccg  cuts  max_Lpun"]
        for it in self.iterations:
            lines.append(f"{it.index:<5d} {it.lb:<15.6f} {it.ub:<15.6f} {it.n_scenarios:<4d} "
                         f"{it.ccg_iterations:<4d} {it.cuts_added:<5d} {it.max_lpun:.6f}")
        return "\n".join(lines)


def outer_loop(spec: SystemSpec, hps: HyperplaneSet | None = None,
               mode: str = evolution.FIX_EQUALITY, jobs: int = 1) -> OuterResult:
    """Relax, solve robustly, replay causally, and add correction rows until
    no scenario period is left with punish cost above ``lpun_tol``."""
    hps = hps or algorithm1(spec)
    cuts = CutSet()
    scenarios: list = []
    iterations: list[OuterIteration] = []
    states, decisions = [], []
    first = last = None
    decision = None
    for it in range(1, spec.max_outer_iters + 1):
        t0 = time.perf_counter()
        decision, found, state = robust.ccg_loop(spec, hps, cuts, seed_scenarios=scenarios)
        scenarios = found
        states.append(state)
        decisions.append(decision)
        results = evolution.evolve_all(spec, hps, decision, scenarios, mode=mode, jobs=jobs)
        errored = [r for r in results if r.status != "ok"]
        if errored:
            raise RuntimeError(f"evolution failed: {errored[0].error}")
        if first is None:
            first = results
        last = results
        bad = evolution.collect_infeasible(results, spec.lpun_tol)
        max_lpun = max((float(r.lpun.max()) for r in results), default=0.0)
        added = 0
        for entry in bad:
            cut = build_cut(entry, decision, spec, cuts.next_id(), it)
            if not cut.violated_by(decision):
                raise AssertionError(f"cut {cut.id} does not separate its own schedule")
            cuts.add(cut)
            added += 1
        iterations.append(OuterIteration(
            it, state.lb, state.ub, len(scenarios), state.iteration, added, max_lpun,
            evolution.average_imbalance(results, spec.n_periods), time.perf_counter() - t0))
        log.info("outer %d: UB=%.3f cuts+%d max Lpun=%.3f", it, state.ub, added, max_lpun)
        if not bad:
            return OuterResult(decision, hps, cuts, scenarios, iterations, first, last,
                               True, states, decisions)
    return OuterResult(decision, hps, cuts, scenarios, iterations, first, last,
                       False, states, decisions)
