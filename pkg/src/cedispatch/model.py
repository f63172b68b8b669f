"""Static system description, config loading and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

BUNDLED_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    """Bad config file: parse failure or a violated invariant.

    ``locus`` names the offending field (``storages[0].e_init``) or the
    ``line:column`` of a parse error.
    """

    def __init__(self, locus: str, message: str):
        super().__init__(f"{locus}: {message}")
        self.locus = locus


@dataclass(frozen=True)
class GeneratorSpec:
    id: str
    t_on_min: int
    t_off_min: int
    p_min: float
    p_max: float
    ramp_down: float
    ramp_up: float
    inertia_h: float
    droop_inv: float
    f_h: float
    t_r: float
    cost_up: float
    cost_down: float
    cost_energy: float


@dataclass(frozen=True)
class StorageSpec:
    id: str
    p_max: float
    e_min: float
    e_max: float
    e_init: float
    eta_ch: float
    eta_dc: float
    cost_throughput: float = 2.0


@dataclass(frozen=True)
class FqrLoadSpec:
    id: str
    cap_min: float
    cap_max: float
    cost: float = 5.0


@dataclass(frozen=True)
class ClLoadSpec:
    id: str
    cap_min: float
    cap_max: float
    cost: float = 80.0


@dataclass(frozen=True)
class RenewableSeries:
    id: str
    expected: tuple[float, ...]
    half_width: tuple[float, ...]


@dataclass(frozen=True)
class DemandSeries:
    id: str
    demand: tuple[float, ...]


@dataclass(frozen=True)
class SystemSpec:
    generators: tuple[GeneratorSpec, ...]
    storages: tuple[StorageSpec, ...]
    fqr_loads: tuple[FqrLoadSpec, ...]
    cl_loads: tuple[ClLoadSpec, ...]
    renewables: tuple[RenewableSeries, ...]
    demands: tuple[DemandSeries, ...]
    n_periods: int
    b_base: float
    damping_mw_per_hz: float
    f0: float = 50.0
    f_min: float = 49.7
    delta_p_fraction: float = 0.1
    punish_price: float = 1000.0
    delta_cr: float = 1e-3
    lpun_tol: float = 1.0
    max_outer_iters: int = 10
    ccg_gap_tol: float = 1e-4
    uncertainty_budget: int | None = None
    ccg_max_iters: int = 25
    relax_max_iters: int = 200
    initial_status: tuple[int, ...] | None = None
    name: str = "system"

    # -- per-unit and derived --------------------------------------------
    @property
    def damping_d(self) -> float:
        """Damping in p.u. power per p.u. frequency on ``b_base``."""
        return self.damping_mw_per_hz * self.f0 / self.b_base

    @property
    def freq_margin(self) -> float:
        """``1 - f_min / f0``: allowed nadir in p.u. of ``f0``."""
        return 1.0 - self.f_min / self.f0

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    def total_demand(self) -> np.ndarray:
        if not self.demands:
            return np.zeros(self.n_periods)
        return np.sum([d.demand for d in self.demands], axis=0).astype(float)

    def renewable_expected(self) -> np.ndarray:
        return np.array([r.expected for r in self.renewables], dtype=float).reshape(
            len(self.renewables), self.n_periods)

    def renewable_half_width(self) -> np.ndarray:
        return np.array([r.half_width for r in self.renewables], dtype=float).reshape(
            len(self.renewables), self.n_periods)

    def delta_p_series(self) -> np.ndarray:
        return self.delta_p_fraction * self.total_demand()

    def initial_on(self) -> np.ndarray:
        if self.initial_status is None:
            return np.zeros(self.n_gen, dtype=int)
        return np.array(self.initial_status, dtype=int)

    def replace(self, **changes) -> "SystemSpec":
        spec = dataclasses.replace(self, **changes)
        validate(spec)
        return spec


def delta_p(spec: SystemSpec, t: int) -> float:
    """Disturbance size in MW for period ``t`` (1-based)."""
    if not 1 <= t <= spec.n_periods:
        raise ValueError(f"period {t} outside 1..{spec.n_periods}")
    return float(spec.delta_p_fraction * spec.total_demand()[t - 1])


# -- validation ----------------------------------------------------------------

def _check(cond: bool, locus: str, message: str) -> None:
    if not cond:
        raise ConfigError(locus, message)


def _finite(obj, locus: str) -> None:
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, float) or isinstance(v, int) and not isinstance(v, bool):
            _check(np.isfinite(v), f"{locus}.{f.name}", "must be finite")


def validate(spec: SystemSpec) -> None:
    T = spec.n_periods
    _check(T >= 1, "system.n_periods", "must be >= 1")
    _check(len(spec.generators) > 0, "generators", "no synchronous generators")
    ids: set[str] = set()
    groups = [("generators", spec.generators), ("storages", spec.storages),
              ("fqr_loads", spec.fqr_loads), ("cl_loads", spec.cl_loads),
              ("renewables", spec.renewables), ("demands", spec.demands)]
    for group, items in groups:
        for k, item in enumerate(items):
            loc = f"{group}[{k}]"
            _check(item.id not in ids, f"{loc}.id", f"duplicate id {item.id!r}")
            ids.add(item.id)
            _finite(item, loc)
    for k, g in enumerate(spec.generators):
        loc = f"generators[{k}]"
        _check(0 <= g.p_min, f"{loc}.p_min", "must be >= 0")
        _check(g.p_min <= g.p_max, f"{loc}.p_max", "must be >= p_min")
        _check(g.p_max > 0, f"{loc}.p_max", "must be > 0")
        _check(g.ramp_up > 0, f"{loc}.ramp_up", "must be > 0")
        _check(g.ramp_down > 0, f"{loc}.ramp_down", "must be > 0")
        _check(g.t_on_min >= 1, f"{loc}.t_on_min", "must be >= 1")
        _check(g.t_off_min >= 1, f"{loc}.t_off_min", "must be >= 1")
        _check(g.inertia_h > 0, f"{loc}.inertia_h", "must be > 0")
        _check(g.droop_inv > 0, f"{loc}.droop_inv", "must be > 0")
        _check(0 <= g.f_h <= 1, f"{loc}.f_h", "must lie in [0, 1]")
        _check(g.t_r > 0, f"{loc}.t_r", "must be > 0")
        _check(min(g.cost_up, g.cost_down, g.cost_energy) >= 0, f"{loc}.cost_energy",
               "costs must be >= 0")
    for k, s in enumerate(spec.storages):
        loc = f"storages[{k}]"
        _check(s.p_max > 0, f"{loc}.p_max", "must be > 0")
        _check(0 < s.eta_ch <= 1, f"{loc}.eta_ch", "must lie in (0, 1]")
        _check(0 < s.eta_dc <= 1, f"{loc}.eta_dc", "must lie in (0, 1]")
        _check(s.e_min <= s.e_max, f"{loc}.e_max", "must be >= e_min")
        _check(s.e_min <= s.e_init, f"{loc}.e_init", "must be >= e_min")
        _check(s.e_init <= s.e_max, f"{loc}.e_init", "must be <= e_max")
        _check(s.cost_throughput >= 0, f"{loc}.cost_throughput", "must be >= 0")
    for group, items in (("fqr_loads", spec.fqr_loads), ("cl_loads", spec.cl_loads)):
        for k, c in enumerate(items):
            loc = f"{group}[{k}]"
            _check(0 <= c.cap_min, f"{loc}.cap_min", "must be >= 0")
            _check(c.cap_min <= c.cap_max, f"{loc}.cap_max", "must be >= cap_min")
            _check(c.cost >= 0, f"{loc}.cost", "must be >= 0")
    for k, r in enumerate(spec.renewables):
        loc = f"renewables[{k}]"
        _check(len(r.expected) == T, f"{loc}.expected", f"needs {T} entries")
        _check(len(r.half_width) == T, f"{loc}.half_width", f"needs {T} entries")
        e, h = np.array(r.expected, float), np.array(r.half_width, float)
        _check(bool(np.all(np.isfinite(e)) and np.all(np.isfinite(h))), f"{loc}.expected",
               "must be finite")
        _check(bool(np.all(h >= 0)), f"{loc}.half_width", "must be >= 0")
        _check(bool(np.all(e - h >= -1e-9)), f"{loc}.half_width", "expected - half_width < 0")
    for k, d in enumerate(spec.demands):
        loc = f"demands[{k}]"
        _check(len(d.demand) == T, f"{loc}.demand", f"needs {T} entries")
        arr = np.array(d.demand, float)
        _check(bool(np.all(np.isfinite(arr)) and np.all(arr >= 0)), f"{loc}.demand",
               "must be finite and >= 0")
    _check(spec.b_base > 0 and np.isfinite(spec.b_base), "system.b_base", "must be > 0")
    _check(spec.damping_mw_per_hz >= 0, "system.damping_d", "must be >= 0")
    _check(spec.f0 > 0, "system.f0", "must be > 0")
    _check(spec.f_min < spec.f0, "system.f_min", "must be < f0")
    _check(spec.f_min > 0, "system.f_min", "must be > 0")
    _check(0 < spec.delta_p_fraction < 1, "system.delta_p_fraction", "must lie in (0, 1)")
    _check(spec.punish_price > 0, "system.punish_price", "must be > 0")
    _check(spec.delta_cr > 0, "system.delta_cr", "must be > 0")
    _check(spec.lpun_tol >= 0, "system.lpun_tol", "must be >= 0")
    _check(spec.max_outer_iters >= 1, "system.max_outer_iters", "must be >= 1")
    _check(spec.ccg_max_iters >= 1, "system.ccg_max_iters", "must be >= 1")
    _check(spec.relax_max_iters >= 1, "system.relax_max_iters", "must be >= 1")
    _check(spec.ccg_gap_tol > 0, "system.ccg_gap_tol", "must be > 0")
    if spec.uncertainty_budget is not None:
        _check(0 <= spec.uncertainty_budget <= len(spec.renewables) * T,
               "system.uncertainty_budget", "must lie in 0..n_renewables*n_periods")
    if spec.initial_status is not None:
        _check(len(spec.initial_status) == spec.n_gen
               and all(v in (0, 1) for v in spec.initial_status),
               "system.initial_status", "needs one 0/1 entry per generator")


# -- parsing -------------------------------------------------------------------

_SYSTEM_KEYS = {
    "name", "n_periods", "b_base", "damping_d", "f0", "f_min", "delta_p_fraction",
    "punish_price", "delta_cr", "lpun_tol", "max_outer_iters", "ccg_gap_tol",
    "uncertainty_budget", "ccg_max_iters", "relax_max_iters", "initial_status",
}
_INT_FIELDS = {"t_on_min", "t_off_min", "n_periods", "max_outer_iters",
               "ccg_max_iters", "relax_max_iters"}


def _build(cls, raw: Any, locus: str):
    if not isinstance(raw, dict):
        raise ConfigError(locus, "expected a mapping")
    names = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigError(f"{locus}.{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for name, f in names.items():
        if name not in raw:
            if f.default is dataclasses.MISSING:
                raise ConfigError(f"{locus}.{name}", "missing field")
            continue
        v = raw[name]
        try:
            if name == "id":
                v = str(v)
            elif name in ("expected", "half_width", "demand"):
                v = tuple(float(a) for a in v)
            elif name in _INT_FIELDS:
                if isinstance(v, bool) or float(v) != int(v):
                    raise ValueError("not an integer")
                v = int(v)
            else:
                v = float(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{locus}.{name}", f"bad value {raw[name]!r} ({exc})") from None
        kwargs[name] = v
    return cls(**kwargs)


def spec_from_dict(raw: Any) -> SystemSpec:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping with a 'system' key")
    unknown = set(raw) - {"system", "generators", "storages", "fqr_loads", "cl_loads",
                          "renewables", "demands"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    system = raw.get("system")
    if not isinstance(system, dict):
        raise ConfigError("system", "missing or not a mapping")
    bad = set(system) - _SYSTEM_KEYS
    if bad:
        raise ConfigError(f"system.{sorted(bad)[0]}", "unknown field")

    def group(key, cls):
        items = raw.get(key) or []
        if not isinstance(items, list):
            raise ConfigError(key, "expected a list")
        return tuple(_build(cls, item, f"{key}[{k}]") for k, item in enumerate(items))

    gens = group("generators", GeneratorSpec)
    kw: dict[str, Any] = {}
    for key in _SYSTEM_KEYS - {"damping_d", "name", "initial_status", "uncertainty_budget"}:
        if key in system and system[key] is not None:
            try:
                v = system[key]
                kw[key] = int(v) if key in _INT_FIELDS else float(v)
            except (TypeError, ValueError):
                raise ConfigError(f"system.{key}", f"bad value {system[key]!r}") from None
    if "n_periods" not in kw:
        raise ConfigError("system.n_periods", "missing field")
    if "b_base" not in kw:
        kw["b_base"] = float(sum(g.p_max for g in gens)) if gens else 1.0
    try:
        kw["damping_mw_per_hz"] = float(system.get("damping_d", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("system.damping_d", "bad value") from None
    if system.get("uncertainty_budget") is not None:
        kw["uncertainty_budget"] = int(system["uncertainty_budget"])
    if system.get("initial_status") is not None:
        kw["initial_status"] = tuple(int(v) for v in system["initial_status"])
    kw["name"] = str(system.get("name", "system"))
    spec = SystemSpec(
        generators=gens,
        storages=group("storages", StorageSpec),
        fqr_loads=group("fqr_loads", FqrLoadSpec),
        cl_loads=group("cl_loads", ClLoadSpec),
        renewables=group("renewables", RenewableSeries),
        demands=group("demands", DemandSeries),
        **kw,
    )
    validate(spec)
    return spec


def spec_to_dict(spec: SystemSpec) -> dict:
    def item(obj):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    system = {
        "name": spec.name,
        "n_periods": spec.n_periods,
        "b_base": spec.b_base,
        "damping_d": spec.damping_mw_per_hz,
        "f0": spec.f0,
        "f_min": spec.f_min,
        "delta_p_fraction": spec.delta_p_fraction,
        "punish_price": spec.punish_price,
        "delta_cr": spec.delta_cr,
        "lpun_tol": spec.lpun_tol,
        "max_outer_iters": spec.max_outer_iters,
        "ccg_gap_tol": spec.ccg_gap_tol,
        "uncertainty_budget": spec.uncertainty_budget,
        "ccg_max_iters": spec.ccg_max_iters,
        "relax_max_iters": spec.relax_max_iters,
        "initial_status": list(spec.initial_status) if spec.initial_status else None,
    }
    return {
        "system": system,
        "generators": [item(g) for g in spec.generators],
        "storages": [item(s) for s in spec.storages],
        "fqr_loads": [item(b) for b in spec.fqr_loads],
        "cl_loads": [item(c) for c in spec.cl_loads],
        "renewables": [item(r) for r in spec.renewables],
        "demands": [item(d) for d in spec.demands],
    }


def dumps(spec: SystemSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False, default_flow_style=None)


def loads(text: str) -> SystemSpec:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        locus = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "<yaml>"
        raise ConfigError(locus, f"parse error: {getattr(exc, 'problem', exc)}") from None
    return spec_from_dict(raw)


def load_system(path: str | Path) -> SystemSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    return loads(path.read_text())


def save_system(spec: SystemSpec, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps(spec))
    return path


def bundled(name: str = "case14") -> Path:
    """Path of a config shipped with the package (``case14`` or ``case14_stressed``)."""
    path = BUNDLED_DIR / f"{name}.yaml"
    if not path.exists():
        raise FileNotFoundError(path)
    return path
