"""Regenerate the bundled YAML cases in src/cedispatch/data/.

Generator and storage data describe a 14-bus test system. The load and
renewable curves are synthetic: a double-peak demand and a midday renewable
peak with a +/-15% band.

    python scripts/make_bundled_cases.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from cedispatch.model import (
    ClLoadSpec, DemandSeries, FqrLoadSpec, GeneratorSpec, RenewableSeries,
    StorageSpec, SystemSpec, save_system, validate,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "cedispatch" / "data"

TOTAL_LOAD = np.array([
    340, 325, 315, 310, 315, 335, 375, 420, 460, 485, 495, 490,
    475, 465, 470, 485, 510, 530, 525, 505, 475, 440, 400, 365,
], dtype=float)
RENEWABLE = np.array([
    35, 33, 30, 28, 27, 30, 40, 55, 75, 95, 110, 118,
    120, 115, 100, 80, 55, 38, 32, 30, 30, 32, 34, 35,
], dtype=float)
LOAD_SHARES = {"D1": 0.40, "D2": 0.35, "D3": 0.25}

GENERATORS = (
    # id, Ton, Toff, pmin, pmax, RD, RU, H, 1/R, FH, TR, cU, cD, cSG
    GeneratorSpec("G1", 4, 4, 100, 200, 75, 75, 7, 25, 0.3, 6, 1500, 1500, 13.29),
    GeneratorSpec("G2", 4, 4, 100, 200, 75, 75, 7, 25, 0.3, 5, 1500, 1500, 13.29),
    GeneratorSpec("G3", 3, 3, 80, 150, 50, 50, 5, 20, 0.2, 4, 1000, 1000, 15.47),
    GeneratorSpec("G4", 2, 2, 10, 50, 40, 40, 4, 20, 0.2, 3, 500, 500, 14.50),
)
STORAGE = StorageSpec("ES1", p_max=10, e_min=2, e_max=18, e_init=10,
                      eta_ch=0.95, eta_dc=0.95, cost_throughput=2.0)


# larger unit for the stressed case: a schedule that banks energy for the
# morning ramp, which a period-by-period replay spends too early
STRESSED_STORAGE = StorageSpec("ES1", p_max=20, e_min=6, e_max=54, e_init=30,
                               eta_ch=0.95, eta_dc=0.95, cost_throughput=2.0)


def make_case(name: str, load: np.ndarray, renewable: np.ndarray,
              generators=GENERATORS, half_width_frac: float = 0.15,
              storage: StorageSpec = STORAGE) -> SystemSpec:
    load = np.round(load, 3)
    demands = tuple(DemandSeries(k, tuple(float(v) for v in np.round(load * s, 3)))
                    for k, s in LOAD_SHARES.items())
    total = np.sum([d.demand for d in demands], axis=0)
    spec = SystemSpec(
        generators=tuple(generators),
        storages=(storage,),
        fqr_loads=(FqrLoadSpec("FQR1", 0.0, 30.0, cost=5.0),),
        cl_loads=(ClLoadSpec("CL1", 0.0, round(0.1 * float(total.max()), 3), cost=80.0),),
        renewables=(RenewableSeries(
            "RG1", tuple(float(v) for v in renewable),
            tuple(float(v) for v in np.round(half_width_frac * renewable, 3))),),
        demands=demands,
        n_periods=len(load),
        b_base=float(sum(g.p_max for g in generators)),
        damping_mw_per_hz=2.0,
        name=name,
    )
    validate(spec)
    return spec


def base_case() -> SystemSpec:
    return make_case("case14", TOTAL_LOAD, RENEWABLE)


def stressed_case() -> SystemSpec:
    return make_case("case14_stressed", TOTAL_LOAD * 1.02, RENEWABLE,
                     storage=STRESSED_STORAGE)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for spec in (base_case(), stressed_case()):
        path = save_system(spec, OUT / f"{spec.name}.yaml")
        print("wrote", path)


if __name__ == "__main__":
    main()
