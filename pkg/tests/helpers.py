"""Small hand-sized systems shared by the tests."""

from __future__ import annotations

import numpy as np

from cedispatch.model import (
    ClLoadSpec, DemandSeries, FqrLoadSpec, GeneratorSpec, RenewableSeries,
    StorageSpec, SystemSpec, validate,
)

BIG = GeneratorSpec("A", 2, 2, 40, 150, 60, 60, 7, 25, 0.3, 6, 1500, 1500, 13.29)
SMALL = GeneratorSpec("B", 1, 1, 10, 50, 40, 40, 4, 20, 0.2, 3, 500, 500, 14.50)


def toy_spec(demand=(100.0, 120.0, 90.0), generators=(BIG, SMALL), renewable=None,
             half_width=None, storage: StorageSpec | None = None, fqr_cap=(0.0, 30.0),
             cl_cap=None, **system) -> SystemSpec:
    T = len(demand)
    renewables = ()
    if renewable is not None:
        hw = half_width if half_width is not None else [0.0] * T
        renewables = (RenewableSeries("R", tuple(map(float, renewable)), tuple(map(float, hw))),)
    kw = dict(b_base=float(sum(g.p_max for g in generators)), damping_mw_per_hz=2.0,
              delta_p_fraction=0.01)
    kw.update(system)
    spec = SystemSpec(
        generators=tuple(generators),
        storages=(storage,) if storage else (),
        fqr_loads=(FqrLoadSpec("F", *fqr_cap),) if fqr_cap else (),
        cl_loads=(ClLoadSpec("C", *cl_cap),) if cl_cap else (),
        renewables=renewables,
        demands=(DemandSeries("D", tuple(map(float, demand))),),
        n_periods=T,
        **kw,
    )
    validate(spec)
    return spec


def brute_force_binary(p):
    """Optimum of a small 0-1 problem by enumerating every assignment."""
    from itertools import product

    from cedispatch import mp

    best = None
    for bits in product((0.0, 1.0), repeat=len(p.binaries)):
        q = p.copy()
        for j, b in zip(p.binaries, bits):
            q.variables[j].lb = q.variables[j].ub = b
        sol = mp.solve_lp(q)
        if sol.optimal:
            if best is None or (sol.objective > best if p.maximize else sol.objective < best):
                best = sol.objective
    return best


def tableau_simplex(c, A, b):
    """Textbook dense-tableau simplex for ``min c.x, A x <= b, x >= 0`` with b >= 0.

    Bland's rule throughout. Returns (status, objective).
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = c
    basis = list(range(n, n + m))
    for _ in range(10_000):
        enter = next((j for j in range(n + m) if T[m, j] < -1e-11), None)
        if enter is None:
            return "optimal", -T[m, -1]
        col = T[:m, enter]
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > 1e-11]
        if not ratios:
            return "unbounded", -np.inf
        _, _, r = min(ratios)
        T[r] /= T[r, enter]
        for i in range(m + 1):
            if i != r:
                T[i] -= T[i, enter] * T[r]
        basis[r] = enter
    raise RuntimeError("tableau oracle did not terminate")


def shortfall_case(spikes=None, T=18, base=100.0):
    """Two generators, A committed and B offline, with demand spikes.

    ``spikes`` maps 1-based period to extra MW; the default is 80 MW at the
    last period, 30 MW beyond A's rating.
    """
    spikes = {T: 80.0} if spikes is None else spikes
    demand = [base + spikes.get(t, 0.0) for t in range(1, T + 1)]
    spec = toy_spec(demand=demand, cl_cap=(0.0, 10.0))
    x = np.zeros((2, T), dtype=int)
    x[0] = 1
    from cedispatch.dispatch import DayAheadDecision

    d = DayAheadDecision.from_commitment(spec, x, fqr_cap=np.full((1, T), 30.0),
                                         cl_cap=np.zeros((1, T)))
    return spec, d
