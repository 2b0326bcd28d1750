import json

import pytest

from kernelop import kernel as kmod
from kernelop.cli import main
from kernelop.experiments import ExperimentConfig


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_benchmark_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code, text, _ = run(["benchmark", "helmholtz-20", "--out", str(out), "--set", "family_size=4"], capsys)
    assert code == 0
    assert "rel L2" in text and "wall time" in text
    for name in ["errors.csv", "summary.csv", "resolved-config.txt"]:
        data = (out / name).read_bytes()
        assert b"\r" not in data and data.endswith(b"\n")
    rows = (out / "errors.csv").read_text().splitlines()
    assert rows[0] == "k,rel_l2,rel_linf" and len(rows) == 5


def test_rerun_from_echoed_config_is_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["benchmark", "heat", "--out", str(a), "--set", "family_size=3",
                "--set", "n_interior=300", "--set", "n_boundary=200", "--set", "n_initial=100"], capsys)[0] == 0
    assert run(["benchmark", "heat", "--config", str(a / "resolved-config.txt"), "--out", str(b)], capsys)[0] == 0
    for name in ["errors.csv", "summary.csv"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nproblem = darcy-a2\nlam = 1e-4\nsizes = 10, 20\n")
    c = ExperimentConfig.from_pairs(ExperimentConfig.read_pairs(cfg) + [("lam", "2e-4")])
    r = c.resolved()
    assert r.lam == 2e-4 and r.n_interior == 2500 and r.sizes == [10, 20] and r.bandwidth == 1.0
    assert ExperimentConfig(problem="poisson3d").resolved().centers == 1500


def test_usage_errors(tmp_path, capsys):
    assert run(["benchmark", "nope", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["benchmark", "heat", "--set", "bogus=1", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["benchmark", "heat", "--config", str(tmp_path / "missing.txt")], capsys)[0] == 2
    assert run(["benchmark", "heat", "--threads", "0"], capsys)[0] == 2


def test_numerical_failure_exit(tmp_path, capsys, monkeypatch):
    from kernelop import experiments
    from kernelop.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("factorization failed")

    monkeypatch.setattr(experiments, "fit_operator", boom)
    code, _, err = run(["benchmark", "helmholtz-20", "--out", str(tmp_path), "--set", "family_size=1"], capsys)
    assert code == 3 and "factorization failed" in err


def test_empty_family(tmp_path, capsys):
    code, _, _ = run(["benchmark", "helmholtz-20", "--set", "family_size=0", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "errors.csv").read_text() == "k,rel_l2,rel_linf\n"


def test_synthetic_convergence(tmp_path, capsys):
    code, _, _ = run(["convergence", "--set", "synthetic_rate=0.5", "--set", "trials=3",
                      "--threads", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    slopes = json.loads((tmp_path / "slopes.json").read_text())
    assert slopes["beta_l2"] == pytest.approx(0.5, abs=1e-12)
    assert (tmp_path / "summary.csv").read_text().splitlines()[0] == "N,mean_l2,se_l2,mean_linf,se_linf"


def test_small_lowrank_convergence(tmp_path, capsys):
    code, text, _ = run(["convergence", "--set", "sizes=600,1200,2400", "--set", "trials=1",
                         "--set", "centers=150", "--set", "batch_size=500", "--set", "family_size=3",
                         "--out", str(tmp_path)], capsys)
    assert code == 0
    assert len((tmp_path / "errors.csv").read_text().splitlines()) == 4
    assert "beta_l2" in text


def test_selfcheck_passes_and_is_deterministic(capsys):
    code1, out1, _ = run(["selfcheck"], capsys)
    code2, out2, _ = run(["selfcheck"], capsys)
    assert code1 == 0 and out1 == out2
    assert out1.count("PASS") == 5


def test_selfcheck_detects_corrupted_hermite(capsys, monkeypatch):
    monkeypatch.setattr(kmod, "hermite_step", lambda k, t, h, hp: 2.0 * t * h - 2.0 * (k + 1) * hp)
    code, out, _ = run(["kernel-check"], capsys)
    assert code == 4 and "FAIL kernel-derivatives" in out
