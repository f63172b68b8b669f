"""Tangent-hyperplane outer approximation of the nadir function.

Starting from the tangent plane at the all-committed point, the loop solves
``max beta s.t. beta <= L_h(alpha)`` over the region of reachable alpha
vectors, adds a tangent plane at the maximiser and stops once the LP bound is
within ``delta_cr`` of the best ``g`` seen at an anchor.

The region is parameterised by the relaxed commitment ``x in [0, 1]^n`` with
``alpha = x @ K``; floors on ``a_hg`` and ``a_rg`` keep it away from the
zero-inertia corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mp
from .model import SystemSpec
from .sfr import AlphaVector, g_eval, g_grad, generator_images

EPS_FRACTION = 0.05


class RelaxationError(RuntimeError):
    def __init__(self, message: str, gap: float | None = None):
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class Hyperplane:
    id: int
    anchor: AlphaVector
    value_at_anchor: float
    gradient: np.ndarray

    def __call__(self, alpha) -> np.ndarray | float:
        a = np.asarray(alpha, dtype=float)
        return self.value_at_anchor + (a - self.anchor.as_array()) @ self.gradient

    @property
    def intercept(self) -> float:
        """Constant term of ``L_h`` written as ``intercept + gradient . alpha``."""
        return float(self.value_at_anchor - self.gradient @ self.anchor.as_array())


@dataclass
class PaRegion:
    images: np.ndarray        # (n_gen, 4)
    floor: np.ndarray         # minimum a_hg, a_rg

    @classmethod
    def from_spec(cls, spec: SystemSpec, eps_fraction: float = EPS_FRACTION) -> "PaRegion":
        K = generator_images(spec)
        full = K.sum(axis=0)
        return cls(K, eps_fraction * full[:2])

    def alpha(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.images

    def contains(self, a, tol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(a[0] >= self.floor[0] - tol and a[1] >= self.floor[1] - tol)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws of ``x`` mapped to alpha, floors enforced by rejection."""
        out = []
        got = 0
        while got < n:
            x = rng.uniform(0.0, 1.0, size=(2 * (n - got) + 16, len(self.images)))
            a = x @ self.images
            keep = a[(a[:, 0] >= self.floor[0]) & (a[:, 1] >= self.floor[1])]
            out.append(keep)
            got += len(keep)
        return np.concatenate(out)[:n]


@dataclass
class HyperplaneSet:
    planes: list[Hyperplane]
    delta_cr: float
    terminal_gap: float = np.inf
    betas: list[float] = field(default_factory=list)
    iterations: int = 0
    damping: float = 0.0

    @property
    def n_hp(self) -> int:
        return len(self.planes)

    def envelope(self, alphas) -> np.ndarray:
        a = np.atleast_2d(np.asarray(alphas, dtype=float))
        vals = np.stack([hp(a) for hp in self.planes], axis=0)
        return vals.min(axis=0)

    def to_dict(self) -> dict:
        return {
            "delta_cr": self.delta_cr,
            "terminal_gap": self.terminal_gap,
            "iterations": self.iterations,
            "damping": self.damping,
            "betas": list(self.betas),
            "hyperplanes": [
                {"id": hp.id, "anchor": hp.anchor.as_array().tolist(),
                 "value": hp.value_at_anchor, "gradient": hp.gradient.tolist()}
                for hp in self.planes
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "HyperplaneSet":
        planes = [Hyperplane(int(h["id"]), AlphaVector.from_array(h["anchor"]),
                             float(h["value"]), np.array(h["gradient"], dtype=float))
                  for h in raw["hyperplanes"]]
        if not planes:
            raise ValueError("hyperplane file holds no hyperplanes")
        return cls(planes, float(raw["delta_cr"]), float(raw["terminal_gap"]),
                   list(raw.get("betas", [])), int(raw.get("iterations", 0)),
                   float(raw.get("damping", 0.0)))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "HyperplaneSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def tangent_plane(anchor: AlphaVector, spec: SystemSpec, region: PaRegion | None = None,
                  id: int = 0) -> Hyperplane:
    region = region or PaRegion.from_spec(spec)
    a = anchor.as_array()
    if a[0] <= 0 or a[1] <= 0 or a[3] <= 0 or a[2] < 0:
        raise RelaxationError(f"anchor {a} on the boundary of the domain of g")
    if not region.contains(a):
        raise RelaxationError(f"anchor {a} outside the alpha region (floor {region.floor})")
    d = spec.damping_d
    return Hyperplane(id, anchor, g_eval(anchor, d), g_grad(anchor, d))


def oa_step(hps: HyperplaneSet, region: PaRegion) -> tuple[AlphaVector, float, mp.LpSolution]:
    """Maximise the current envelope over the region (one LP)."""
    if not hps.planes:
        raise ValueError("need at least one hyperplane")
    K = region.images
    p = mp.ProblemDef(name="oa", maximize=True)
    xs = [p.add_var(f"x[{g}]", 0.0, 1.0) for g in range(len(K))]
    beta = p.add_var("beta", -mp.INF, mp.INF, obj=1.0)
    for hp in hps.planes:
        coeffs = {beta: 1.0}
        for g, j in enumerate(xs):
            coeffs[j] = -float(K[g] @ hp.gradient)
        p.add_constraint(coeffs, mp.LE, hp.intercept, name=f"L[{hp.id}]")
    p.add_constraint({j: K[g, 0] for g, j in enumerate(xs)}, mp.GE, region.floor[0], "floor_hg")
    p.add_constraint({j: K[g, 1] for g, j in enumerate(xs)}, mp.GE, region.floor[1], "floor_rg")
    sol = mp.solve_lp(p)
    if not sol.optimal:
        raise RelaxationError(f"outer-approximation LP {sol.status}")
    x = np.clip(sol.x[xs], 0.0, 1.0)
    return AlphaVector.from_array(x @ K), float(sol.x[beta]), sol


def algorithm1(spec: SystemSpec, delta_cr: float | None = None,
               max_iters: int | None = None, region: PaRegion | None = None,
               start_x=None) -> HyperplaneSet:
    """Outer-approximation loop; the first anchor is all units committed
    unless ``start_x`` (relaxed commitment) is given."""
    delta_cr = spec.delta_cr if delta_cr is None else delta_cr
    max_iters = spec.relax_max_iters if max_iters is None else max_iters
    region = region or PaRegion.from_spec(spec)
    d = spec.damping_d
    x0 = np.ones(len(region.images)) if start_x is None else np.asarray(start_x, dtype=float)
    first = AlphaVector.from_array(region.alpha(x0))
    hps = HyperplaneSet([tangent_plane(first, spec, region, id=1)], delta_cr, damping=d)
    best = hps.planes[0].value_at_anchor
    gap = np.inf
    for it in range(1, max_iters + 1):
        anchor, beta, _ = oa_step(hps, region)
        hps.betas.append(beta)
        best = max(best, g_eval(anchor, d))
        gap = beta - best
        hps.iterations = it
        hps.terminal_gap = gap
        if gap < delta_cr:
            return hps
        hps.planes.append(tangent_plane(anchor, spec, region, id=len(hps.planes) + 1))
    raise RelaxationError(f"no convergence in {max_iters} iterations (gap {gap:.3g})", gap)


def envelope_gap(hps: HyperplaneSet, region: PaRegion, n: int = 10_000,
                 seed: int = 0) -> tuple[float, float]:
    """(min, max) over uniform region samples of ``min_h L_h - g``."""
    rng = np.random.default_rng(seed)
    alphas = region.sample(n, rng)
    env = hps.envelope(alphas)
    g = np.array([g_eval(AlphaVector.from_array(a), hps.damping) for a in alphas])
    diff = env - g
    return float(diff.min()), float(diff.max())
