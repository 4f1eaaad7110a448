import csv
import json
import math
import os

import numpy as np
import pytest

from landau_spectra import cli

DISK = {"shape": "disk", "radius": 1.0, "v": 1.0}


def run(tmp_path, command, cfg, name="out", env=None, monkeypatch=None):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = cli.main([command, "--config", str(cfg_path), "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_predict_disk(tmp_path):
    code, out = run(tmp_path, "predict", {"model": {"B": 1}, "window": [1.5, 2.5], "potential": DISK})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["A"]["total"] == pytest.approx(0.5)
    assert rep["identity"]["pass"]
    assert rep["exceptional_warnings"] == []


def test_predict_zero_and_exceptional(tmp_path):
    code, out = run(tmp_path, "predict", {"window": [1.5, 2.5], "potential": {"shape": "zero"}}, "z")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and rep["A"]["total"] == 0 and rep["exceptional_warnings"] == []
    code, out = run(tmp_path, "predict", {"window": [2.0, 2.5], "potential": DISK}, "e")
    rep = json.loads((out / "report.json").read_text())
    assert code == 0 and len(rep["exceptional_warnings"]) == 1


def test_toeplitz_radial_vs_dense(tmp_path):
    base = {"potential": {"shape": "annulus_step", "d1": 0.5, "d2": 1.0, "v": 1.0},
            "q": 1, "t": 6.0, "lambdas": [0.2, 0.5]}
    _, a = run(tmp_path, "toeplitz", dict(base, path="radial"), "rad")
    _, b = run(tmp_path, "toeplitz", dict(base, path="dense"), "den")
    ha, ra = read_csv(a / "spectrum.csv")
    hb, rb = read_csv(b / "spectrum.csv")
    assert ha == hb == ["index", "eigenvalue"]
    assert len(ra) == len(rb) > 0
    np.testing.assert_allclose([float(r[1]) for r in ra], [float(r[1]) for r in rb], atol=1e-9)
    rep = json.loads((a / "report.json").read_text())
    assert rep["trace"]["pass"]
    assert rep["trace"]["trace"] == pytest.approx(rep["trace"]["predicted"], rel=1e-6)
    th = rep["thresholds"][0]
    assert th["predicted_plus"] == pytest.approx(36 / (2 * math.pi) * math.pi * 0.75)


def test_toeplitz_zero_potential(tmp_path):
    code, out = run(tmp_path, "toeplitz", {"potential": {"shape": "zero"}, "q": 0, "t": 3.0})
    assert code == 0
    assert (out / "spectrum.csv").read_text() == "index,eigenvalue\n"


def test_toeplitz_csv_digits(tmp_path):
    _, out = run(tmp_path, "toeplitz", {"potential": DISK, "q": 0, "t": 2.0})
    _, rows = read_csv(out / "spectrum.csv")
    for _, val in rows:
        assert float(val) == float(format(float(val), ".17g"))
        assert val == format(float(val), ".17g")


def test_sweep_zero_potential(tmp_path):
    code, out = run(tmp_path, "sweep", {"window": [1.5, 2.5], "potential": {"shape": "zero"},
                                        "t_values": [4, 6, 8], "J": 2})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["fit"] is None and all(r["N"] == 0 for r in rep["rows"])
    lines = (out / "sweep.dat").read_text().splitlines()
    assert lines[0].startswith("#") and "predicted constant" in lines[0]
    assert all(len(l.split()) == 2 for l in lines[1:])


def test_sweep_gap_violation_writes_nothing(tmp_path, capsys):
    code, out = run(tmp_path, "sweep", {"window": [1.5, 3.0], "potential": DISK, "t_values": [4]})
    assert code == 2
    assert not out.exists()
    assert "Landau level" in capsys.readouterr().err


def test_sweep_soft_failure(tmp_path):
    # t far too small for the asymptotic regime
    code, out = run(tmp_path, "sweep", {"window": [1.5, 2.5], "potential": DISK,
                                        "t_values": [1.0, 1.5], "J": 3})
    assert code == 3
    assert json.loads((out / "report.json").read_text())["pass"] is False


def test_sweep_deterministic_and_thread_independent(tmp_path, monkeypatch):
    cfg = {"window": [1.5, 2.5], "potential": DISK, "t_values": [3, 4, 5, 6], "J": 3, "seed": 4}
    _, a = run(tmp_path, "sweep", cfg, "a")
    monkeypatch.setenv("THREADS", "3")
    _, b = run(tmp_path, "sweep", cfg, "b")
    for f in ("report.json", "sweep.csv", "sweep.dat"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rows = read_csv(a / "sweep.csv")[1]
    assert [float(r[0]) for r in rows] == [3, 4, 5, 6]


def test_sweep_output_selection(tmp_path):
    _, out = run(tmp_path, "sweep", {"window": [1.5, 2.5], "potential": DISK, "t_values": [3],
                                     "J": 2, "outputs": ["csv"]})
    assert sorted(os.listdir(out)) == ["sweep.csv"]


def test_bad_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("THREADS", "zero")
    code, _ = run(tmp_path, "sweep", {"window": [1.5, 2.5], "potential": DISK, "t_values": [3]})
    assert code == 2


@pytest.mark.parametrize("cfg", [
    {"window": [1.5, 2.5], "potential": DISK, "t_values": []},
    {"window": [1.5, 2.5], "potential": DISK, "t_values": [4, 3]},
    {"window": [1.5, 2.5], "potential": {"shape": "hexagon"}, "t_values": [4]},
    {"window": [1.5], "potential": DISK, "t_values": [4]},
    {"window": [1.5, 2.5], "potential": DISK, "t_values": [4], "J": 0},
])
def test_sweep_config_errors(tmp_path, cfg):
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 2 and not out.exists()


def test_missing_and_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["predict", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["predict", "--out", str(tmp_path / "o")]) == 2


def test_levelset_command(tmp_path):
    cfg = {"potential": {"shape": "gaussian", "v": 2.0, "s": 1.0},
           "queries": [{"type": "sup", "lam": 1.0}, {"type": "between", "lam": 0.5, "mu": 3.0},
                       {"type": "mass", "lam": 0.5}]}
    code, out = run(tmp_path, "levelset", cfg)
    rep = json.loads((out / "report.json").read_text())
    assert code == 0
    assert rep["results"][0]["value"] == pytest.approx(math.pi * math.log(2))
    assert rep["results"][1]["value"] == pytest.approx(math.pi * math.log(4))
    assert rep["norms"]["l1"] == pytest.approx(2 * math.pi)


def test_write_outputs_atomic(tmp_path, monkeypatch):
    calls = []
    real = os.replace
    monkeypatch.setattr(os, "replace", lambda a, b: calls.append(b) or real(a, b))
    cli.write_outputs(str(tmp_path), {"x.txt": "1\n", "y.txt": "2\n"})
    assert sorted(os.listdir(tmp_path)) == ["x.txt", "y.txt"]
    assert len(calls) == 2


CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


@pytest.mark.parametrize("name", ["predict", "toeplitz", "levelset"])
def test_example_configs_run(tmp_path, name):
    out = tmp_path / name
    code = cli.main([name, "--config", os.path.join(CONFIG_DIR, f"{name}.json"), "--out", str(out)])
    assert code == 0
    assert (out / "report.json").exists()


def test_example_levelset_norms(tmp_path):
    # Gaussian 2 e^{-|x|^2} plus -1 on a disk of radius 1/2 at (3, 0)
    out = tmp_path / "ls"
    cli.main(["levelset", "--config", os.path.join(CONFIG_DIR, "levelset.json"), "--out", str(out)])
    rep = json.loads((out / "report.json").read_text())
    norms = rep["norms"]
    assert norms["l1"] == pytest.approx(7.0677066638, rel=1e-9)
    assert norms["l2sq"] == pytest.approx(7.0677066638, rel=1e-9)
