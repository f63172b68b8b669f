"""Problem builders for the day-ahead and operating stages.

Naming: variable and row names carry the device id and a 1-based period,
e.g. ``x[G1,3]`` or ``bal[3]``. Recourse copies prefix every name with a tag
such as ``k2:`` so several copies can share one master problem.

First-stage quantities (commitment and procured capacities) enter recourse
rows either as master variables or as constants of a fixed decision; both
cases go through :class:`_FirstStage`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mp
from .model import SystemSpec
from .sfr import generator_images


# -- decisions -----------------------------------------------------------------

@dataclass
class DayAheadDecision:
    x: np.ndarray          # (G, T) 0/1
    y: np.ndarray          # startups
    z: np.ndarray          # shutdowns
    fqr_cap: np.ndarray    # (B, T) MW
    cl_cap: np.ndarray     # (C, T) MW

    def __post_init__(self):
        self.x = np.rint(np.asarray(self.x, dtype=float)).astype(int)
        self.y = np.rint(np.asarray(self.y, dtype=float)).astype(int)
        self.z = np.rint(np.asarray(self.z, dtype=float)).astype(int)
        self.fqr_cap = np.asarray(self.fqr_cap, dtype=float)
        self.cl_cap = np.asarray(self.cl_cap, dtype=float)

    @classmethod
    def from_commitment(cls, spec: SystemSpec, x, fqr_cap=None, cl_cap=None) -> "DayAheadDecision":
        """Derive y and z from x and the initial status."""
        x = np.asarray(x, dtype=int)
        prev = np.column_stack([spec.initial_on(), x[:, :-1]])
        dx = x - prev
        T = spec.n_periods
        if fqr_cap is None:
            fqr_cap = np.array([[f.cap_min] * T for f in spec.fqr_loads]).reshape(-1, T)
        if cl_cap is None:
            cl_cap = np.array([[c.cap_min] * T for c in spec.cl_loads]).reshape(-1, T)
        return cls(x, (dx > 0).astype(int), (dx < 0).astype(int), fqr_cap, cl_cap)

    def on_counter(self, spec: SystemSpec) -> np.ndarray:
        """Consecutive on-periods up to and including t (0 when off)."""
        out = np.zeros_like(self.x)
        for g in range(self.x.shape[0]):
            run = 0
            for t in range(self.x.shape[1]):
                run = run + 1 if self.x[g, t] else 0
                out[g, t] = run
        return out

    def off_counter(self, spec: SystemSpec) -> np.ndarray:
        """Consecutive off-periods up to t; an initially-off unit owes nothing."""
        big = 10 ** 6
        out = np.zeros_like(self.x)
        for g in range(self.x.shape[0]):
            run = 0 if spec.initial_on()[g] else big
            for t in range(self.x.shape[1]):
                run = 0 if self.x[g, t] else run + 1
                out[g, t] = run
        return out

    def first_stage_cost(self, spec: SystemSpec) -> float:
        cu = np.array([g.cost_up for g in spec.generators])
        cd = np.array([g.cost_down for g in spec.generators])
        total = float(cu @ self.y.sum(axis=1) + cd @ self.z.sum(axis=1))
        if len(spec.fqr_loads):
            total += float(np.array([b.cost for b in spec.fqr_loads]) @ self.fqr_cap.sum(axis=1))
        if len(spec.cl_loads):
            total += float(np.array([c.cost for c in spec.cl_loads]) @ self.cl_cap.sum(axis=1))
        return total

    def check_shape(self, spec: SystemSpec) -> None:
        T = spec.n_periods
        want = {"x": (spec.n_gen, T), "y": (spec.n_gen, T), "z": (spec.n_gen, T),
                "fqr_cap": (len(spec.fqr_loads), T), "cl_cap": (len(spec.cl_loads), T)}
        for k, shape in want.items():
            got = getattr(self, k).shape
            if got != shape:
                raise ValueError(f"decision field {k} has shape {got}, expected {shape}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("x", "y", "z", "fqr_cap", "cl_cap")}

    @classmethod
    def from_dict(cls, raw: dict) -> "DayAheadDecision":
        try:
            return cls(*(np.array(raw[k], dtype=float) for k in ("x", "y", "z", "fqr_cap", "cl_cap")))
        except KeyError as e:
            raise ValueError(f"decision file lacks field {e.args[0]!r}") from None

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> "DayAheadDecision":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DayAheadDecision):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("x", "y", "z", "fqr_cap", "cl_cap"))


@dataclass
class RecourseDecision:
    p_g: np.ndarray        # (G, T)
    p_r: np.ndarray        # (R, T)
    p_ch: np.ndarray       # (S, T)
    p_dc: np.ndarray
    soc: np.ndarray
    p_b: np.ndarray        # (B, T)
    p_c: np.ndarray        # (C, T)
    s_plus: np.ndarray     # (T,)
    s_minus: np.ndarray

    @property
    def imbalance(self) -> np.ndarray:
        return self.s_plus + self.s_minus


@dataclass
class CostBreakdown:
    l_sa: np.ndarray
    l_si: np.ndarray
    l_es: np.ndarray
    l_fqr: np.ndarray
    l_cl: np.ndarray
    l_pun: np.ndarray

    @property
    def per_period(self) -> np.ndarray:
        return self.l_sa + self.l_si + self.l_es + self.l_fqr + self.l_cl + self.l_pun

    @property
    def total(self) -> float:
        return float(self.per_period.sum())

    def totals(self) -> dict[str, float]:
        out = {k: float(getattr(self, k).sum())
               for k in ("l_sa", "l_si", "l_es", "l_fqr", "l_cl", "l_pun")}
        out["total"] = self.total
        return out


def cost_terms(spec: SystemSpec, da: DayAheadDecision, rec: RecourseDecision) -> CostBreakdown:
    T = spec.n_periods
    cu = np.array([g.cost_up for g in spec.generators])
    cd = np.array([g.cost_down for g in spec.generators])
    csg = np.array([g.cost_energy for g in spec.generators])
    ces = np.array([e.cost_throughput for e in spec.storages])
    cb = np.array([b.cost for b in spec.fqr_loads])
    cc = np.array([c.cost for c in spec.cl_loads])
    return CostBreakdown(
        l_sa=cu @ da.y + cd @ da.z,
        l_si=csg @ rec.p_g,
        l_es=ces @ (rec.p_ch + rec.p_dc) if len(ces) else np.zeros(T),
        l_fqr=cb @ rec.p_b if len(cb) else np.zeros(T),
        l_cl=cc @ rec.p_c if len(cc) else np.zeros(T),
        l_pun=spec.punish_price * (rec.s_plus + rec.s_minus),
    )


# -- first stage ---------------------------------------------------------------

@dataclass
class FirstStageVars:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    fqr_cap: np.ndarray
    cl_cap: np.ndarray

    def decision(self, values: np.ndarray) -> DayAheadDecision:
        return DayAheadDecision(values[self.x], values[self.y], values[self.z],
                                values[self.fqr_cap], values[self.cl_cap])


def _idx(shape) -> np.ndarray:
    return np.zeros(shape, dtype=int)


def build_first_stage(spec: SystemSpec, cuts=(), p: mp.ProblemDef | None = None
                      ) -> tuple[mp.ProblemDef, FirstStageVars]:
    """Commitment logic, capacity bounds, first-stage costs and correction rows.

    Minimum up/down times use window inequalities: a startup at t forces the
    unit on for the next ``t_on_min`` periods (truncated at the horizon end),
    a shutdown keeps it off for ``t_off_min``.
    """
    p = p or mp.ProblemDef(name="first_stage")
    G, T = spec.n_gen, spec.n_periods
    fv = FirstStageVars(_idx((G, T)), _idx((G, T)), _idx((G, T)),
                        _idx((len(spec.fqr_loads), T)), _idx((len(spec.cl_loads), T)))
    x0 = spec.initial_on()
    for g, gen in enumerate(spec.generators):
        for t in range(T):
            fv.x[g, t] = p.add_var(f"x[{gen.id},{t + 1}]", binary=True)
            fv.y[g, t] = p.add_var(f"y[{gen.id},{t + 1}]", binary=True, obj=gen.cost_up)
            fv.z[g, t] = p.add_var(f"z[{gen.id},{t + 1}]", binary=True, obj=gen.cost_down)
        for t in range(T):
            coeffs = {fv.y[g, t]: 1.0, fv.z[g, t]: -1.0, fv.x[g, t]: -1.0}
            rhs = 0.0
            if t > 0:
                coeffs[fv.x[g, t - 1]] = 1.0
            else:
                rhs = -float(x0[g])
            p.add_constraint(coeffs, mp.EQ, rhs, f"link[{gen.id},{t + 1}]")
        for t in range(T):
            up = range(t, min(t + gen.t_on_min, T))
            row = {fv.x[g, s]: 1.0 for s in up}
            row[fv.y[g, t]] = row.get(fv.y[g, t], 0.0) - len(up)
            p.add_constraint(row, mp.GE, 0.0, f"minup[{gen.id},{t + 1}]")
            dn = range(t, min(t + gen.t_off_min, T))
            row = {fv.x[g, s]: -1.0 for s in dn}
            row[fv.z[g, t]] = -float(len(dn))
            p.add_constraint(row, mp.GE, -float(len(dn)), f"mindown[{gen.id},{t + 1}]")
    for b, f in enumerate(spec.fqr_loads):
        for t in range(T):
            fv.fqr_cap[b, t] = p.add_var(f"fqrcap[{f.id},{t + 1}]", f.cap_min, f.cap_max, obj=f.cost)
    for c, cl in enumerate(spec.cl_loads):
        for t in range(T):
            fv.cl_cap[c, t] = p.add_var(f"clcap[{cl.id},{t + 1}]", cl.cap_min, cl.cap_max, obj=cl.cost)
    for cut in cuts:
        add_cut_row(p, fv, cut)
    return p, fv


def add_cut_row(p: mp.ProblemDef, fv: FirstStageVars, cut) -> int:
    """``sum G_g (x_g,t - xhat) + sum Gamma_c (cap_c,t - caphat) <= rhs`` as one row."""
    t = cut.t - 1
    coeffs: dict[int, float] = {}
    shift = 0.0
    for g, a in enumerate(cut.gen_coef):
        if a != 0.0:
            coeffs[int(fv.x[g, t])] = float(a)
            shift += float(a) * float(cut.x_hat[g])
    for c, a in enumerate(cut.cl_coef):
        if a != 0.0:
            coeffs[int(fv.cl_cap[c, t])] = float(a)
            shift += float(a) * float(cut.cap_hat[c])
    return p.add_constraint(coeffs, mp.LE, float(cut.rhs) + shift, f"cut[{cut.id}]")


# -- recourse ------------------------------------------------------------------

class _FirstStage:
    """First-stage quantities as ``(var_index, None)`` or ``(None, value)``."""

    def __init__(self, spec: SystemSpec, first):
        self.spec = spec
        self.vars = first if isinstance(first, FirstStageVars) else None
        self.dec = first if isinstance(first, DayAheadDecision) else None
        if self.vars is None and self.dec is None:
            raise TypeError("first stage must be FirstStageVars or DayAheadDecision")

    def get(self, kind: str, i: int, t: int):
        if kind == "x" and t < 0:
            return None, float(self.spec.initial_on()[i])
        if self.vars is not None:
            return int(getattr(self.vars, kind)[i, t]), None
        return None, float(getattr(self.dec, kind)[i, t])


def _row(p: mp.ProblemDef, name: str, terms, sense: str, rhs: float) -> int:
    """Emit ``sum coef * ref (sense) rhs`` with refs that may be constants."""
    coeffs: dict[int, float] = {}
    for coef, (j, v) in terms:
        if j is None:
            rhs -= coef * v
        else:
            coeffs[j] = coeffs.get(j, 0.0) + coef
    return p.add_constraint(coeffs, sense, rhs, name)


def _var(j: int):
    return j, None


@dataclass
class RecourseVars:
    p_g: np.ndarray
    p_r: np.ndarray | None
    p_ch: np.ndarray
    p_dc: np.ndarray
    soc: np.ndarray
    p_b: np.ndarray
    p_c: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    balance_rows: np.ndarray
    cost: dict[int, float] = field(default_factory=dict)

    def decision(self, values: np.ndarray, p_r_values: np.ndarray) -> RecourseDecision:
        p_r = values[self.p_r] if self.p_r is not None else np.asarray(p_r_values, dtype=float)
        return RecourseDecision(values[self.p_g], p_r, values[self.p_ch], values[self.p_dc],
                                values[self.soc], values[self.p_b], values[self.p_c],
                                values[self.s_plus], values[self.s_minus])


def frequency_row_terms(spec: SystemSpec, hp) -> tuple[np.ndarray, float]:
    """Per-generator x coefficient and constant of ``B * margin * L_h(alpha(x))``.

    The frequency requirement reads ``sum p_b + sum_g w_g x_g >= dP - k``.
    """
    scale = spec.b_base * spec.freq_margin
    w = scale * (generator_images(spec) @ hp.gradient)
    return w, scale * hp.intercept


def build_recourse(spec: SystemSpec, hps, p: mp.ProblemDef, first,
                   scenario=None, tag: str = "", objective: bool = True) -> RecourseVars:
    """Operating-stage variables and rows for one renewable realisation.

    ``scenario`` is an (R, T) array of renewable outputs, placed on the
    right-hand side of the balance rows, or ``None`` to keep each output a
    variable bounded by its forecast band.
    """
    fs = _FirstStage(spec, first)
    G, T = spec.n_gen, spec.n_periods
    S, B, C, R = len(spec.storages), len(spec.fqr_loads), len(spec.cl_loads), len(spec.renewables)
    rv = RecourseVars(_idx((G, T)), None if scenario is not None else _idx((R, T)),
                      _idx((S, T)), _idx((S, T)), _idx((S, T)), _idx((B, T)), _idx((C, T)),
                      _idx(T), _idx(T), _idx(T))
    cost = rv.cost
    cp = spec.punish_price
    for t in range(T):
        n = t + 1
        for g, gen in enumerate(spec.generators):
            rv.p_g[g, t] = j = p.add_var(f"{tag}p[{gen.id},{n}]", -mp.INF, mp.INF)
            cost[j] = gen.cost_energy
        for e, st in enumerate(spec.storages):
            rv.p_ch[e, t] = p.add_var(f"{tag}pch[{st.id},{n}]", 0.0, st.p_max)
            rv.p_dc[e, t] = p.add_var(f"{tag}pdc[{st.id},{n}]", 0.0, st.p_max)
            rv.soc[e, t] = p.add_var(f"{tag}soc[{st.id},{n}]", st.e_min, st.e_max)
            cost[rv.p_ch[e, t]] = st.cost_throughput
            cost[rv.p_dc[e, t]] = st.cost_throughput
        for b, f in enumerate(spec.fqr_loads):
            rv.p_b[b, t] = p.add_var(f"{tag}pb[{f.id},{n}]", 0.0, mp.INF)
        for c, cl in enumerate(spec.cl_loads):
            rv.p_c[c, t] = p.add_var(f"{tag}pc[{cl.id},{n}]", 0.0, mp.INF)
        if rv.p_r is not None:
            for r, ren in enumerate(spec.renewables):
                lo = ren.expected[t] - ren.half_width[t]
                hi = ren.expected[t] + ren.half_width[t]
                rv.p_r[r, t] = p.add_var(f"{tag}pr[{ren.id},{n}]", lo, hi)
        rv.s_plus[t] = p.add_var(f"{tag}splus[{n}]", 0.0, mp.INF)
        rv.s_minus[t] = p.add_var(f"{tag}sminus[{n}]", 0.0, mp.INF)
        cost[rv.s_plus[t]] = cp
        cost[rv.s_minus[t]] = cp

    for t in range(T):
        n = t + 1
        for g, gen in enumerate(spec.generators):
            pg = _var(rv.p_g[g, t])
            xt = fs.get("x", g, t)
            _row(p, f"{tag}genlo[{gen.id},{n}]", [(1.0, pg), (-gen.p_min, xt)], mp.GE, 0.0)
            _row(p, f"{tag}genup[{gen.id},{n}]", [(1.0, pg), (-gen.p_max, xt)], mp.LE, 0.0)
            prev = _var(rv.p_g[g, t - 1]) if t > 0 else (None, gen.p_min * float(spec.initial_on()[g]))
            xprev = fs.get("x", g, t - 1)
            _row(p, f"{tag}rampdn[{gen.id},{n}]",
                 [(1.0, prev), (-1.0, pg), (gen.p_max - gen.ramp_down, xt)], mp.LE, gen.p_max)
            _row(p, f"{tag}rampup[{gen.id},{n}]",
                 [(1.0, pg), (-1.0, prev), (gen.p_max - gen.ramp_up, xprev)], mp.LE, gen.p_max)
        for e, st in enumerate(spec.storages):
            terms = [(1.0, _var(rv.soc[e, t])), (-st.eta_ch, _var(rv.p_ch[e, t])),
                     (1.0 / st.eta_dc, _var(rv.p_dc[e, t]))]
            terms.append((-1.0, _var(rv.soc[e, t - 1]) if t > 0 else (None, st.e_init)))
            _row(p, f"{tag}soc_bal[{st.id},{n}]", terms, mp.EQ, 0.0)
            if t == T - 1:
                _row(p, f"{tag}soc_end[{st.id}]", [(1.0, _var(rv.soc[e, t]))], mp.GE, st.e_init)
        for b, f in enumerate(spec.fqr_loads):
            _row(p, f"{tag}fqr[{f.id},{n}]",
                 [(1.0, _var(rv.p_b[b, t])), (-1.0, fs.get("fqr_cap", b, t))], mp.LE, 0.0)
        for c, cl in enumerate(spec.cl_loads):
            _row(p, f"{tag}cl[{cl.id},{n}]",
                 [(1.0, _var(rv.p_c[c, t])), (-1.0, fs.get("cl_cap", c, t))], mp.LE, 0.0)
        terms = [(1.0, _var(j)) for j in rv.p_g[:, t]]
        terms += [(1.0, _var(j)) for j in rv.p_dc[:, t]]
        terms += [(-1.0, _var(j)) for j in rv.p_ch[:, t]]
        terms += [(1.0, _var(j)) for j in rv.p_c[:, t]]
        terms += [(1.0, _var(rv.s_plus[t])), (-1.0, _var(rv.s_minus[t]))]
        if rv.p_r is not None:
            terms += [(1.0, _var(j)) for j in rv.p_r[:, t]]
        else:
            terms += [(1.0, (None, float(v))) for v in np.asarray(scenario)[:, t]]
        rv.balance_rows[t] = _row(p, f"{tag}bal[{n}]", terms, mp.EQ, float(spec.total_demand()[t]))
        dp = float(spec.delta_p_series()[t])
        for hp in hps.planes:
            w, k = frequency_row_terms(spec, hp)
            terms = [(1.0, _var(j)) for j in rv.p_b[:, t]]
            terms += [(float(w[g]), fs.get("x", g, t)) for g in range(G)]
            _row(p, f"{tag}freq[{hp.id},{n}]", terms, mp.GE, dp - k)
    if objective:
        for j, c in cost.items():
            p.objective[j] = p.objective.get(j, 0.0) + c
    return rv


# -- independent check ---------------------------------------------------------

def check_constraints(spec: SystemSpec, hps, da: DayAheadDecision, rec: RecourseDecision,
                      tol: float = 1e-6) -> list[str]:
    """Re-evaluate every device, balance and frequency constraint from scratch.

    Returns human-readable violations; empty when the pair is feasible.
    Minimum up/down times are checked through the duration counters.
    """
    out: list[str] = []
    G, T = spec.n_gen, spec.n_periods
    x = da.x
    x0 = spec.initial_on()
    xprev = np.column_stack([x0, x[:, :-1]])
    if not np.array_equal(da.y - da.z, x - xprev):
        out.append("startup/shutdown inconsistent with commitment")
    if np.any((da.y + da.z) > 1) or np.any(da.y < 0) or np.any(da.z < 0):
        out.append("startup/shutdown flags out of range")
    on, off = da.on_counter(spec), da.off_counter(spec)
    for g, gen in enumerate(spec.generators):
        for t in range(T - 1):
            if x[g, t] == 1 and x[g, t + 1] == 0 and on[g, t] < gen.t_on_min:
                out.append(f"{gen.id}: shut down at {t + 2} after {on[g, t]} on-periods")
            if x[g, t] == 0 and x[g, t + 1] == 1 and off[g, t] < gen.t_off_min:
                out.append(f"{gen.id}: started at {t + 2} after {off[g, t]} off-periods")
        for t in range(T):
            pg = rec.p_g[g, t]
            if pg < gen.p_min * x[g, t] - tol or pg > gen.p_max * x[g, t] + tol:
                out.append(f"{gen.id},{t + 1}: output {pg:.6g} outside limits")
            prev = rec.p_g[g, t - 1] if t > 0 else gen.p_min * x0[g]
            xp = x[g, t - 1] if t > 0 else x0[g]
            if prev - pg > gen.ramp_down * x[g, t] + gen.p_max * (1 - x[g, t]) + tol:
                out.append(f"{gen.id},{t + 1}: ramp-down limit")
            if pg - prev > gen.ramp_up * xp + gen.p_max * (1 - xp) + tol:
                out.append(f"{gen.id},{t + 1}: ramp-up limit")
    for e, st in enumerate(spec.storages):
        prev = st.e_init
        for t in range(T):
            if not (-tol <= rec.p_ch[e, t] <= st.p_max + tol and -tol <= rec.p_dc[e, t] <= st.p_max + tol):
                out.append(f"{st.id},{t + 1}: storage power outside limits")
            if not st.e_min - tol <= rec.soc[e, t] <= st.e_max + tol:
                out.append(f"{st.id},{t + 1}: state of charge outside limits")
            want = prev + st.eta_ch * rec.p_ch[e, t] - rec.p_dc[e, t] / st.eta_dc
            if abs(rec.soc[e, t] - want) > tol:
                out.append(f"{st.id},{t + 1}: state-of-charge recursion")
            prev = rec.soc[e, t]
        if rec.soc[e, T - 1] < st.e_init - tol:
            out.append(f"{st.id}: terminal state of charge below initial")
    for b, f in enumerate(spec.fqr_loads):
        for t in range(T):
            if not f.cap_min - tol <= da.fqr_cap[b, t] <= f.cap_max + tol:
                out.append(f"{f.id},{t + 1}: capacity outside limits")
            if not -tol <= rec.p_b[b, t] <= da.fqr_cap[b, t] + tol:
                out.append(f"{f.id},{t + 1}: response outside capacity")
    for c, cl in enumerate(spec.cl_loads):
        for t in range(T):
            if not cl.cap_min - tol <= da.cl_cap[c, t] <= cl.cap_max + tol:
                out.append(f"{cl.id},{t + 1}: capacity outside limits")
            if not -tol <= rec.p_c[c, t] <= da.cl_cap[c, t] + tol:
                out.append(f"{cl.id},{t + 1}: curtailment outside capacity")
    lo = spec.renewable_expected() - spec.renewable_half_width()
    hi = spec.renewable_expected() + spec.renewable_half_width()
    if np.any(rec.p_r < lo - tol) or np.any(rec.p_r > hi + tol):
        out.append("renewable output outside its forecast band")
    if np.any(rec.s_plus < -tol) or np.any(rec.s_minus < -tol):
        out.append("negative balance slack")
    supply = (rec.p_g.sum(axis=0) + rec.p_r.sum(axis=0) + rec.p_dc.sum(axis=0)
              - rec.p_ch.sum(axis=0) + rec.p_c.sum(axis=0) + rec.s_plus - rec.s_minus)
    bad = np.abs(supply - spec.total_demand()) > tol * (1 + spec.total_demand())
    for t in np.flatnonzero(bad):
        out.append(f"balance violated at {t + 1}")
    K = generator_images(spec)
    for t in range(T):
        alpha = x[:, t] @ K
        env = min(float(hp(alpha)) for hp in hps.planes)
        lhs = (spec.delta_p_series()[t] - rec.p_b[:, t].sum()) / spec.b_base
        if lhs > spec.freq_margin * env + tol:
            out.append(f"frequency requirement violated at {t + 1}")
    return out
