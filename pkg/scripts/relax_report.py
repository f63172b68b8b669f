"""Report how well the hyperplane envelope tracks the SFR nadir function g.

Prints the sampled range of envelope - g and the largest midpoint concavity
violation g(mid) - (g(p) + g(q)) / 2 found over random pairs in the region.

    python scripts/relax_report.py [case14|case14_stressed] [--samples N]
"""

from __future__ import annotations

import argparse

import numpy as np

from cedispatch.model import bundled, load_system
from cedispatch.relax import PaRegion, algorithm1, envelope_gap
from cedispatch.sfr import AlphaVector, g_eval


def midpoint_violation(region: PaRegion, d: float, n: int, rng) -> float:
    p, q = region.sample(n, rng), region.sample(n, rng)
    g = lambda a: g_eval(AlphaVector.from_array(a), d)
    return max(g((a + b) / 2) - (g(a) + g(b)) / 2 for a, b in zip(p, q))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("case", nargs="?", default="case14")
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    spec = load_system(bundled(args.case))
    region = PaRegion.from_spec(spec)
    hps = algorithm1(spec)
    lo, hi = envelope_gap(hps, region, n=args.samples, seed=args.seed)
    viol = midpoint_violation(region, hps.damping, args.samples // 10,
                              np.random.default_rng(args.seed))
    print(f"N_HP={hps.n_hp} iterations={hps.iterations} terminal gap={hps.terminal_gap:.3g}")
    print(f"envelope - g over {args.samples} samples: [{lo:.4g}, {hi:.4g}]")
    print(f"largest midpoint concavity violation: {viol:.4g}")


if __name__ == "__main__":
    main()
