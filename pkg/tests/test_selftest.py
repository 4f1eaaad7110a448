import json

from landau_spectra import cli, selftest, specfun


def test_quick_selftest_all_pass_and_seed_robust():
    a = selftest.run_selftest(seed=0, quick=True)
    b = selftest.run_selftest(seed=7, quick=True, threads=4)
    assert [r.name for r in a] == [r.name for r in b]
    assert all(r.passed for r in a), [r.as_dict() for r in a if not r.passed]
    assert [r.passed for r in a] == [r.passed for r in b]


def test_corrupted_laguerre_recurrence_is_caught(monkeypatch):
    real = specfun._scaled_radial

    def broken(q, alpha, xi):
        return real(q, alpha, xi) * (1.0 + 1e-4 * q)

    monkeypatch.setattr(specfun, "_scaled_radial", broken)
    ok, detail = selftest.check_orthonormality(alphas=(0, 7))
    assert not ok
    assert detail["max_deviation"] > 1e-6


def test_selftest_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"quick": True}))
    code = cli.main(["selftest", "--config", str(cfg), "--out", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert code == 0 and rep["all_pass"]
    assert "seconds" not in json.dumps(rep)
