import dataclasses

import numpy as np
import pytest

from cedispatch import relax
from cedispatch.model import GeneratorSpec
from cedispatch.relax import (
    HyperplaneSet, PaRegion, RelaxationError, algorithm1, envelope_gap, oa_step, tangent_plane,
)
from cedispatch.sfr import AlphaVector, OverdampedError, aggregate, g_eval

from helpers import toy_spec


def test_affine_identity_and_taylor(case14, rng):
    region = PaRegion.from_spec(case14)
    anchor = AlphaVector.from_array(region.alpha(np.full(4, 0.7)))
    hp = tangent_plane(anchor, case14, region)
    assert hp(anchor.as_array()) == hp.value_at_anchor == g_eval(anchor, case14.damping_d)
    for _ in range(20):
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        for eps in (1e-2, 1e-3):
            a = anchor.as_array() + eps * v
            err = abs(hp(a) - g_eval(AlphaVector.from_array(a), case14.damping_d))
            assert err <= 5 * eps ** 2


def test_boundary_anchor_rejected(case14):
    with pytest.raises(RelaxationError):
        tangent_plane(AlphaVector(0.0, 1.0, 0.5, 2.0), case14)
    region = PaRegion.from_spec(case14)
    below_floor = AlphaVector.from_array(region.alpha([0.01, 0, 0, 0]))
    with pytest.raises(RelaxationError):
        tangent_plane(below_floor, case14, region)


def test_one_plane_bounds_sampled_max(case14, hps14):
    region = PaRegion.from_spec(case14)
    one = HyperplaneSet(hps14.planes[:1], case14.delta_cr)
    _, beta, _ = oa_step(one, region)
    samples = region.sample(10_000, np.random.default_rng(0))
    gmax = max(g_eval(AlphaVector.from_array(a), case14.damping_d) for a in samples)
    assert beta >= gmax - 1e-9


def test_redundant_plane(case14, hps14):
    region = PaRegion.from_spec(case14)
    p = hps14.planes[0]
    a1, b1, _ = oa_step(HyperplaneSet([p], 1e-3), region)
    twin = dataclasses.replace(p, id=p.id + 1)
    a2, b2, _ = oa_step(HyperplaneSet([p, twin], 1e-3), region)
    assert b1 == pytest.approx(b2, abs=1e-12)
    np.testing.assert_allclose(a1.as_array(), a2.as_array(), atol=1e-12)


def test_bundled_converges_deterministically(case14, hps14):
    again = algorithm1(case14)
    assert hps14.terminal_gap < case14.delta_cr
    assert again.n_hp == hps14.n_hp >= 1
    for p, q in zip(hps14.planes, again.planes):
        assert p.anchor == q.anchor and np.array_equal(p.gradient, q.gradient)
    assert np.all(np.diff(hps14.betas) <= 1e-12)
    region = PaRegion.from_spec(case14)
    assert all(region.contains(p.anchor.as_array()) for p in hps14.planes)


def test_huge_threshold_stops_after_one_check(case14):
    hps = algorithm1(case14, delta_cr=1e3)
    assert hps.iterations == 1 and hps.n_hp == 1


def test_single_generator_segment():
    g = GeneratorSpec("A", 1, 1, 40, 200, 75, 75, 7, 25, 0.3, 6, 0, 0, 13)
    spec = toy_spec(demand=(100.0,), generators=(g,), damping_mw_per_hz=0.5)
    hps = algorithm1(spec)
    assert hps.iterations <= 5 and hps.terminal_gap < spec.delta_cr
    region = PaRegion.from_spec(spec)
    xs = np.linspace(region.floor[0] / region.images[0, 0], 1.0, 2001)
    values = [g_eval(AlphaVector.from_array(region.alpha([x])), spec.damping_d) for x in xs]
    assert hps.betas[-1] >= max(values) - 1e-9


def test_save_load_round_trip(tmp_path, hps14):
    path = hps14.save(tmp_path / "hp.json")
    back = HyperplaneSet.load(path)
    assert back.n_hp == hps14.n_hp and back.terminal_gap == hps14.terminal_gap
    for p, q in zip(back.planes, hps14.planes):
        assert p.anchor == q.anchor and np.array_equal(p.gradient, q.gradient)


def test_upper_tightness(case14, hps14):
    _, hi = envelope_gap(hps14, PaRegion.from_spec(case14), n=10_000)
    assert hi <= 5 * case14.delta_cr


def test_g_not_concave_on_bundled_region(case14):
    """Midpoint counterexample: the tangent envelope cannot be an over-estimate
    everywhere on this fleet, which is why the lower envelope check fails."""
    region = PaRegion.from_spec(case14)
    d = case14.damping_d
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(2000):
        x, y = rng.uniform(0, 1, 4), rng.uniform(0, 1, 4)
        ax, ay = region.alpha(x), region.alpha(y)
        if not (region.contains(ax) and region.contains(ay)):
            continue
        try:
            gx = g_eval(AlphaVector.from_array(ax), d)
            gy = g_eval(AlphaVector.from_array(ay), d)
            gm = g_eval(AlphaVector.from_array((ax + ay) / 2), d)
        except OverdampedError:
            continue
        worst = max(worst, (gx + gy) / 2 - gm)
    assert worst > 1e-3


# -- the loop itself, driven by a concave surrogate --------------------------

def _surrogate(monkeypatch, centre, weights, top):
    def g(a, d):
        v = a.as_array()
        return float(top - weights @ (v - centre) ** 2)

    def grad(a, d, **_):
        return -2 * weights * (a.as_array() - centre)

    monkeypatch.setattr(relax, "g_eval", g)
    monkeypatch.setattr(relax, "g_grad", grad)
    return g


def test_loop_on_concave_surrogate(monkeypatch, case14):
    region = PaRegion.from_spec(case14)
    centre = region.alpha(np.array([0.3, 0.8, 0.5, 0.2]))
    g = _surrogate(monkeypatch, centre, np.array([0.5, 0.05, 0.2, 0.01]), 3.0)
    hps = algorithm1(case14, delta_cr=1e-4)
    assert hps.n_hp > 2
    assert hps.terminal_gap < 1e-4
    assert np.all(np.diff(hps.betas) <= 1e-9)
    assert all(region.contains(p.anchor.as_array()) for p in hps.planes)
    samples = region.sample(2000, np.random.default_rng(1))
    vals = np.array([g(AlphaVector.from_array(a), 0) for a in samples])
    assert np.all(hps.envelope(samples) >= vals - 1e-9)


def test_iteration_cap(monkeypatch, case14):
    region = PaRegion.from_spec(case14)
    centre = region.alpha(np.full(4, 0.5))
    _surrogate(monkeypatch, centre, np.array([0.5, 0.05, 0.2, 0.01]), 3.0)
    with pytest.raises(RelaxationError) as err:
        algorithm1(case14, delta_cr=1e-9, max_iters=2)
    assert err.value.gap is not None and err.value.gap > 0
