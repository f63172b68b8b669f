import dataclasses

import numpy as np
import pytest

from cedispatch import mp, robust
from cedispatch.dispatch import DayAheadDecision
from cedispatch.evolution import (
    CAP_BOUND, FIX_EQUALITY, PeriodState, average_imbalance, build_period_lp,
    collect_infeasible, evolve_all, evolve_scenario, write_results,
)
from cedispatch.model import StorageSpec
from cedispatch.relax import algorithm1

from helpers import shortfall_case, toy_spec

NO_RENEWABLE = np.zeros((0, 1))


def _solve(lp, extra=None):
    fixes = dict(lp.fixes)
    fixes.update(extra or {})
    return mp.fix_and_resolve(lp.problem, fixes)


def test_abundant_period():
    spec = toy_spec(demand=(120.0,))
    hps = algorithm1(spec)
    d = DayAheadDecision.from_commitment(spec, np.ones((2, 1), int), fqr_cap=[[30.0]])
    lp = build_period_lp(spec, hps, d, NO_RENEWABLE, 1, PeriodState.initial(spec))
    sol = _solve(lp)
    assert sol.x[lp.s_plus] == sol.x[lp.s_minus] == 0.0
    assert evolve_scenario(spec, hps, d, NO_RENEWABLE).lpun[0] == 0.0


def test_all_off_pays_full_shortfall():
    spec = toy_spec(demand=(100.0,), cl_cap=None)
    hps = algorithm1(spec)
    d = DayAheadDecision.from_commitment(spec, np.zeros((2, 1), int), fqr_cap=[[30.0]])
    res = evolve_scenario(spec, hps, d, NO_RENEWABLE)
    assert res.status == "ok"
    assert res.recourse.s_plus[0] == pytest.approx(100.0)
    assert res.lpun[0] == pytest.approx(100_000.0)


def test_soc_carry():
    es = StorageSpec("ES", 10, 2, 18, 10, 0.95, 0.95)
    spec = toy_spec(demand=(100.0, 100.0), storage=es)
    hps = algorithm1(spec)
    d = DayAheadDecision.from_commitment(spec, np.ones((2, 2), int), fqr_cap=[[30.0, 30.0]])
    state = PeriodState(np.array([80.0, 20.0]), np.array([10.0]))
    lp = build_period_lp(spec, hps, d, np.zeros((0, 2)), 1, state)
    sol = _solve(lp, {lp.p_dc[0]: 5.0, lp.p_ch[0]: 0.0})
    assert sol.x[lp.soc[0]] == pytest.approx(10 - 5 / 0.95)
    assert sol.x[lp.soc[0]] == pytest.approx(4.7368, abs=1e-4)


def test_seeded_shortfall():
    spec, d = shortfall_case()
    hps = algorithm1(spec)
    res = evolve_scenario(spec, hps, d, np.zeros((0, spec.n_periods)))
    assert res.status == "ok" and res.certified.all()
    assert res.lpun[-1] == pytest.approx(30_000.0)
    assert np.all(res.lpun[:-1] == 0.0)
    du = res.duals[-1]
    assert du.alpha_minus[0] == pytest.approx(-(1000 - 13.29))
    assert du.gamma_minus[0] != 0.0
    entries = collect_infeasible([res])
    assert len(entries) == 1 and entries[0].t == spec.n_periods


def test_collect_ordering():
    spec, d = shortfall_case({5: 60.0, 10: 90.0, 15: 70.0})
    hps = algorithm1(spec)
    res = evolve_scenario(spec, hps, d, np.zeros((0, spec.n_periods)))
    entries = collect_infeasible([res])
    assert [e.t for e in entries] == [10, 15, 5]
    assert [e.lpun for e in entries] == sorted((e.lpun for e in entries), reverse=True)
    assert collect_infeasible([res], lpun_tol=1e9) == []


def test_bundled_evolution_properties(case14, hps14, case14_run):
    d = case14_run.decision
    for res in case14_run.last_evolution:
        assert res.status == "ok"
        assert res.certified.all()
        np.testing.assert_array_equal(
            res.lpun, case14.punish_price * (res.recourse.s_plus + res.recourse.s_minus))
        assert np.all(res.lpun >= 0)
        assert np.array_equal(res.feasible, res.lpun <= case14.lpun_tol)
    # every period LP passes the kernel's verifier
    sc = case14_run.scenarios[0]
    res = evolve_scenario(case14, hps14, d, sc, keep_problems=True)
    for lp, sol in res.problems:
        q = lp.problem.copy()
        for j, v in lp.fixes.items():
            q.variables[j].lb = q.variables[j].ub = v
        assert mp.certify(q, sol.x, sol.duals, sol.reduced_costs).ok


def test_causality(case14, hps14, case14_run):
    d = case14_run.decision
    sc = case14_run.scenarios[0]
    base = evolve_scenario(case14, hps14, d, sc)
    rng = np.random.default_rng(0)
    for k in (3, 11, 20):
        values = sc.values.copy()
        values[:, k:] += rng.uniform(-10, 10, values[:, k:].shape)
        moved = evolve_scenario(case14, hps14, d, values)
        np.testing.assert_array_equal(moved.lpun[:k], base.lpun[:k])
        np.testing.assert_array_equal(moved.recourse.p_g[:, :k], base.recourse.p_g[:, :k])
        np.testing.assert_array_equal(moved.recourse.soc[:, :k], base.recourse.soc[:, :k])


def test_inflated_system_has_no_shortfall(case14):
    big = tuple(dataclasses.replace(g, p_max=10 * g.p_max, ramp_up=10 * g.ramp_up,
                                    ramp_down=10 * g.ramp_down) for g in case14.generators)
    spec = case14.replace(generators=big)
    hps = algorithm1(spec)
    decision, found, _ = robust.ccg_loop(spec, hps)
    for res in evolve_all(spec, hps, decision, found):
        assert res.status == "ok"
        assert np.all(res.lpun == 0.0)


def test_errored_scenario_is_marked():
    spec = toy_spec(demand=(100.0,), delta_p_fraction=0.1)
    hps = algorithm1(spec)
    d = DayAheadDecision.from_commitment(spec, np.zeros((2, 1), int), fqr_cap=[[0.0]])
    res = evolve_scenario(spec, hps, d, NO_RENEWABLE)
    assert res.status == "errored" and "period 1" in res.error


def test_modes_and_parallel(case14, hps14, case14_run):
    d, scs = case14_run.decision, case14_run.scenarios
    serial = evolve_all(case14, hps14, d, scs)
    parallel = evolve_all(case14, hps14, d, scs * 2, jobs=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.lpun, b.lpun)
    bound = evolve_all(case14, hps14, d, scs, mode=CAP_BOUND)
    for res in bound:
        for du in res.duals:
            assert np.all(du.gamma_minus <= 1e-9)
    with pytest.raises(ValueError):
        build_period_lp(case14, hps14, d, scs[0].values, 1, PeriodState.initial(case14),
                        mode="other")
    assert FIX_EQUALITY != CAP_BOUND


def test_imbalance_series_and_csv(tmp_path, case14, case14_run):
    results = case14_run.first_evolution
    avg = average_imbalance(results, case14.n_periods)
    np.testing.assert_allclose(avg, np.mean([r.imbalance for r in results], axis=0))
    paths = write_results(results, case14, tmp_path)
    rows = paths[0].read_text().splitlines()
    assert rows[0].startswith("t,lpun,s_plus,s_minus,soc_ES1,p_G1")
    assert len(rows) == case14.n_periods + 1
    assert average_imbalance([], 3).tolist() == [0.0, 0.0, 0.0]
