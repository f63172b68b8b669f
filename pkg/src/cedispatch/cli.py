"""Command-line entry point.

    cedispatch relax  --config CASE.yaml --out-dir DIR
    cedispatch run    --config CASE.yaml --out-dir DIR [--jobs N] [--hyperplanes FILE]
    cedispatch evolve --config CASE.yaml --decision FILE --scenarios DIR --out-dir DIR

Exit codes: 0 success, 2 input error, 3 relaxation did not converge,
4 correction loop ended with residual punish cost.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, correction, evolution, robust
from .dispatch import DayAheadDecision
from .model import ConfigError, SystemSpec, load_system
from .relax import HyperplaneSet, PaRegion, RelaxationError, algorithm1, envelope_gap
from .sfr import aggregate, g_eval, sfr_simulate

log = logging.getLogger("cedispatch")

EXIT_OK, EXIT_INPUT, EXIT_RELAX, EXIT_OPEN = 0, 2, 3, 4


@dataclass
class RunManifest:
    config: str
    command: str
    seed: int
    version: str = __version__
    timings: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    status: str = "ok"

    def write(self, out_dir: Path) -> Path:
        missing = [o for o in self.outputs
                   if not (out_dir / o).exists() or (out_dir / o).stat().st_size == 0]
        if missing and self.status == "ok":
            raise RuntimeError(f"outputs missing or empty: {missing}")
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2))
        return path


class _Stage:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest, self.name = manifest, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.manifest.timings[self.name] = round(time.perf_counter() - self.t0, 3)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6f}" if isinstance(v, (float, np.floating)) else v for v in row])


def _load(args) -> SystemSpec:
    return load_system(args.config)


# -- reports -------------------------------------------------------------------

def frequency_table(spec: SystemSpec, decision: DayAheadDecision) -> list[list]:
    """Per period: ODE nadir for the committed units under dP - sum of FQR capacity."""
    rows = []
    dp = spec.delta_p_series()
    for t in range(spec.n_periods):
        fqr = float(decision.fqr_cap[:, t].sum()) if decision.fqr_cap.size else 0.0
        dist = max(float(dp[t]) - fqr, 0.0)
        x = decision.x[:, t]
        if dist == 0.0:
            ode = closed = 0.0
        elif not x.any():
            ode = closed = float("inf")
        else:
            a = aggregate(x, spec)
            ode = sfr_simulate(a, spec.damping_d, dist / spec.b_base).nadir * spec.f0
            closed = dist / spec.b_base / g_eval(a, spec.damping_d) * spec.f0
        rows.append([t + 1, float(dp[t]), fqr, dist, ode, closed, spec.f0 - spec.f_min])
    return rows


FREQ_HEADER = ["t", "delta_p_mw", "fqr_cap_mw", "disturbance_mw", "nadir_hz",
               "closed_form_hz", "limit_hz"]


def write_run_bundle(spec: SystemSpec, res: correction.OuterResult, out: Path) -> list[str]:
    T = spec.n_periods
    files = []

    def emit(name, header, rows):
        _write_csv(out / name, header, rows)
        files.append(name)

    d = res.decision
    emit("uc_schedule.csv", ["t"] + [g.id for g in spec.generators],
         [[t + 1] + [int(v) for v in d.x[:, t]] for t in range(T)])
    before = evolution.average_imbalance(res.first_evolution, T)
    after = evolution.average_imbalance(res.last_evolution, T)
    emit("imbalance.csv", ["t", "before_mw", "after_mw"],
         [[t + 1, float(before[t]), float(after[t])] for t in range(T)])
    emit("cl_capacity.csv", ["t"] + [c.id for c in spec.cl_loads],
         [[t + 1] + [float(v) for v in d.cl_cap[:, t]] for t in range(T)])
    emit("fqr_capacity.csv", ["t"] + [b.id for b in spec.fqr_loads],
         [[t + 1] + [float(v) for v in d.fqr_cap[:, t]] for t in range(T)])
    emit("frequency_deviation.csv", FREQ_HEADER, frequency_table(spec, d))
    emit("iterations.csv", ["iter", "lb", "ub", "scenarios", "ccg_iterations", "cuts_added",
                            "max_lpun"],
         [[it.index, it.lb, it.ub, it.n_scenarios, it.ccg_iterations, it.cuts_added,
           it.max_lpun] for it in res.iterations])
    d.save(out / "decision.json")
    files.append("decision.json")
    (out / "cuts.json").write_text(json.dumps([c.to_dict() for c in res.cuts], indent=1))
    files.append("cuts.json")
    (out / "report.txt").write_text(res.report() + "\n")
    files.append("report.txt")
    robust.export_scenarios(spec, res.scenarios, out / "scenarios")
    files.append("scenarios/manifest.json")
    for path in evolution.write_results(res.last_evolution, spec, out / "evolution"):
        files.append(str(path.relative_to(out)))
    return files


# -- commands ------------------------------------------------------------------

def cmd_relax(args) -> int:
    spec = _load(args)
    if args.delta_cr is not None:
        spec = spec.replace(delta_cr=args.delta_cr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(str(args.config), "relax", args.seed)
    try:
        with _Stage(man, "relax"):
            hps = algorithm1(spec)
    except RelaxationError as exc:
        log.error("%s", exc)
        man.status = "not-converged"
        man.write(out)
        return EXIT_RELAX
    hps.save(out / "hyperplanes.json")
    with _Stage(man, "envelope_check"):
        lo, hi = envelope_gap(hps, PaRegion.from_spec(spec), seed=args.seed)
    report = {"n_hp": hps.n_hp, "iterations": hps.iterations, "terminal_gap": hps.terminal_gap,
              "delta_cr": hps.delta_cr, "envelope_minus_g_min": lo, "envelope_minus_g_max": hi}
    (out / "relax_report.json").write_text(json.dumps(report, indent=2))
    man.outputs = ["hyperplanes.json", "relax_report.json"]
    man.write(out)
    print(f"N_HP={hps.n_hp} terminal gap={hps.terminal_gap:.3g} "
          f"envelope-g in [{lo:.3g}, {hi:.3g}]")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(str(args.config), "run", args.seed)
    if args.hyperplanes:
        hps = HyperplaneSet.load(args.hyperplanes)
    else:
        try:
            with _Stage(man, "relax"):
                hps = algorithm1(spec)
        except RelaxationError as exc:
            log.error("%s", exc)
            return EXIT_RELAX
    hps.save(out / "hyperplanes.json")
    with _Stage(man, "outer_loop"):
        res = correction.outer_loop(spec, hps, mode=args.mode, jobs=args.jobs)
    with _Stage(man, "reports"):
        man.outputs = ["hyperplanes.json"] + write_run_bundle(spec, res, out)
    man.status = res.status
    man.write(out)
    print(res.report())
    return EXIT_OK if res.closed else EXIT_OPEN


def cmd_evolve(args) -> int:
    spec = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(str(args.config), "evolve", args.seed)
    try:
        decision = DayAheadDecision.load(args.decision)
        decision.check_shape(spec)
        scenarios = robust.load_scenarios(spec, args.scenarios)
    except (OSError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    hps = HyperplaneSet.load(args.hyperplanes) if args.hyperplanes else algorithm1(spec)
    with _Stage(man, "evolve"):
        results = evolution.evolve_all(spec, hps, decision, scenarios, mode=args.mode,
                                       jobs=args.jobs)
    files = [str(p.relative_to(out)) for p in evolution.write_results(results, spec, out)]
    rows = [[e.scenario, e.t, e.lpun] for e in evolution.collect_infeasible(results)]
    _write_csv(out / "infeasible.csv", ["scenario", "t", "lpun"], rows)
    man.outputs = files + ["infeasible.csv"]
    errored = [r for r in results if r.status != "ok"]
    man.status = "errored" if errored else "ok"
    man.write(out)
    print(f"{len(results)} scenarios, {len(rows)} infeasible periods, {len(errored)} errored")
    return EXIT_OK


# -- entry ---------------------------------------------------------------------

def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cedispatch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("relax", help="build the frequency hyperplanes")
    common(p)
    p.add_argument("--delta-cr", type=float, default=None)
    p.set_defaults(func=cmd_relax)

    for name, func, hlp in (("run", cmd_run, "full dispatch pipeline"),
                            ("evolve", cmd_evolve, "replay a decision over scenarios")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--hyperplanes", default=None)
        p.add_argument("--mode", choices=evolution.MODES, default=evolution.FIX_EQUALITY)
        if name == "evolve":
            p.add_argument("--decision", required=True)
            p.add_argument("--scenarios", required=True)
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
