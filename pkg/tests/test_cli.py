import csv
import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from cedispatch import cli, robust
from cedispatch.model import bundled, save_system
from cedispatch.relax import RelaxationError
from cedispatch.robust import ScenarioVertex

from helpers import shortfall_case

FIGURE_HEADERS = {
    "uc_schedule.csv": ["t", "G1", "G2", "G3", "G4"],
    "imbalance.csv": ["t", "before_mw", "after_mw"],
    "cl_capacity.csv": ["t", "CL1"],
    "fqr_capacity.csv": ["t", "FQR1"],
    "frequency_deviation.csv": cli.FREQ_HEADER,
}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def run14(tmp_path_factory):
    out = tmp_path_factory.mktemp("run14")
    code = cli.main(["run", "--config", str(bundled("case14")), "--out-dir", str(out)])
    return code, out


def test_relax_command(tmp_path, capsys):
    assert cli.main(["relax", "--config", str(bundled("case14")), "--out-dir", str(tmp_path)]) == 0
    hp = json.loads((tmp_path / "hyperplanes.json").read_text())
    assert len(hp["hyperplanes"]) >= 1 and hp["terminal_gap"] < 1e-3
    report = json.loads((tmp_path / "relax_report.json").read_text())
    assert report["n_hp"] == len(hp["hyperplanes"])
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "relax" and man["status"] == "ok"
    assert "N_HP=" in capsys.readouterr().out


def test_relax_huge_threshold(tmp_path):
    assert cli.main(["relax", "--config", str(bundled("case14")), "--out-dir", str(tmp_path),
                     "--delta-cr", "1000"]) == 0


def test_missing_config(tmp_path, capsys):
    code = cli.main(["relax", "--config", str(tmp_path / "none.yaml"), "--out-dir", str(tmp_path)])
    assert code == 2
    assert "none.yaml" in capsys.readouterr().err


def test_bad_field_names_locus(tmp_path, case14, capsys):
    bad = case14.storages[0]
    path = save_system(case14, tmp_path / "c.yaml")
    text = path.read_text().replace("e_init: 10", "e_init: 1")
    path.write_text(text)
    assert cli.main(["relax", "--config", str(path), "--out-dir", str(tmp_path)]) == 2
    assert "storages[0].e_init" in capsys.readouterr().err
    assert bad.e_init == 10


def test_relax_cap_exit_code(tmp_path, monkeypatch):
    def fail(spec, *a, **k):
        raise RelaxationError("no convergence", 0.5)
    monkeypatch.setattr(cli, "algorithm1", fail)
    assert cli.main(["relax", "--config", str(bundled("case14")), "--out-dir", str(tmp_path)]) == 3


def test_run_bundle(run14, case14):
    code, out = run14
    assert code == 0
    for name, header in FIGURE_HEADERS.items():
        rows = _rows(out / name)
        assert rows[0] == header
        assert len(rows) == case14.n_periods + 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "closed"
    for name in man["outputs"]:
        assert (out / name).stat().st_size > 0
    after = np.array([float(r[2]) for r in _rows(out / "imbalance.csv")[1:]])
    assert after.max() <= case14.lpun_tol / case14.punish_price


def test_run_deterministic(run14, tmp_path):
    _, first = run14
    assert cli.main(["run", "--config", str(bundled("case14")), "--out-dir", str(tmp_path)]) == 0
    names = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert names == sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*.csv"))
    for name in names:
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_run_stressed(tmp_path, stressed):
    assert cli.main(["run", "--config", str(bundled("case14_stressed")),
                     "--out-dir", str(tmp_path), "--jobs", "2"]) == 0
    rows = _rows(tmp_path / "imbalance.csv")[1:]
    assert max(float(r[1]) for r in rows) > 0
    assert max(float(r[2]) for r in rows) <= stressed.lpun_tol / stressed.punish_price


def test_run_without_uncertainty_identical_before_after(tmp_path, case14):
    ren = tuple(dataclasses.replace(r, half_width=(0.0,) * 24) for r in case14.renewables)
    cfg = save_system(case14.replace(renewables=ren, storages=()), tmp_path / "flat.yaml")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    for row in _rows(out / "imbalance.csv")[1:]:
        assert row[1] == row[2]


def test_run_not_closed_exit_code(tmp_path, stressed):
    cfg = save_system(stressed.replace(max_outer_iters=1), tmp_path / "one.yaml")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 4
    assert json.loads((out / "manifest.json").read_text())["status"] == "not-closed"
    assert (out / "imbalance.csv").exists()


def test_evolve_feasible_decision(run14, tmp_path):
    _, out = run14
    code = cli.main(["evolve", "--config", str(bundled("case14")),
                     "--decision", str(out / "decision.json"),
                     "--scenarios", str(out / "scenarios"),
                     "--hyperplanes", str(out / "hyperplanes.json"),
                     "--out-dir", str(tmp_path)])
    assert code == 0
    assert _rows(tmp_path / "infeasible.csv") == [["scenario", "t", "lpun"]]
    assert len(list(tmp_path.glob("evolution_*.csv"))) == len(list((out / "scenarios").glob("*.csv")))


def _seeded_inputs(tmp_path, scenarios):
    spec, d = shortfall_case()
    cfg = save_system(spec, tmp_path / "seeded.yaml")
    dec = d.save(tmp_path / "decision.json")
    robust.export_scenarios(spec, scenarios(spec), tmp_path / "sc")
    return cfg, dec


def test_evolve_seeded_shortfall(tmp_path):
    cfg, dec = _seeded_inputs(tmp_path, lambda s: [ScenarioVertex.expected(s)])
    out = tmp_path / "out"
    assert cli.main(["evolve", "--config", str(cfg), "--decision", str(dec),
                     "--scenarios", str(tmp_path / "sc"), "--out-dir", str(out)]) == 0
    rows = _rows(out / "infeasible.csv")
    assert len(rows) == 2 and rows[1][1] == "18"


def test_evolve_no_scenarios(tmp_path):
    cfg, dec = _seeded_inputs(tmp_path, lambda s: [])
    out = tmp_path / "out"
    assert cli.main(["evolve", "--config", str(cfg), "--decision", str(dec),
                     "--scenarios", str(tmp_path / "sc"), "--out-dir", str(out)]) == 0
    assert _rows(out / "infeasible.csv") == [["scenario", "t", "lpun"]]
    assert not list(out.glob("evolution_*.csv"))


def test_evolve_shape_mismatch(run14, tmp_path):
    _, out = run14
    cfg, _ = _seeded_inputs(tmp_path, lambda s: [])
    code = cli.main(["evolve", "--config", str(cfg), "--decision", str(out / "decision.json"),
                     "--scenarios", str(tmp_path / "sc"), "--out-dir", str(tmp_path / "o")])
    assert code == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cedispatch", "relax", "--config",
                          str(bundled("case14")), "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
