"""Command-line driver: outputs, schemas, exit codes and config precedence."""

import csv
import io
import json
import os

import numpy as np
import pytest

from qsdlab import cli, kummer


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=object)


def test_qsd_table_minimal_is_exponential(tmp_path):
    path = tmp_path / "q.csv"
    code, out, _ = run(["qsd", "table", "--alpha", "1", "--beta", "1", "--gamma", "0", "--lambda", "1",
                        "--out", str(path)])
    assert code == 0 and "qsd table" in out
    header, rows = read_csv(path)
    assert header == ["x", "density", "cdf"]
    x, dens, cdf = (rows[:, i].astype(float) for i in range(3))
    assert np.allclose(dens, np.exp(-x), rtol=1e-9)
    assert np.allclose(cdf, -np.expm1(-x), rtol=1e-8, atol=1e-12)


def test_specfun_check(tmp_path):
    path = tmp_path / "s.csv"
    code, out, _ = run(["specfun-check", "--out", str(path)])
    assert code == 0 and "PASS" in out
    header, rows = read_csv(path)
    assert header == ["function", "params", "value", "oracle", "relerr"]
    assert set(rows[:, 0]) == {"bessel_i", "kummer_m", "tricomi_u"}
    assert rows[:, 4].astype(float).max() < 1e-9


def test_kummer_dump(tmp_path):
    prefix = str(tmp_path / "k")
    code, _, _ = run(["kummer", "dump", "--alpha", "1", "--beta", "1", "--gamma", "0.5", "--x", "1",
                      "--n", "20", "--n-atoms", "5", "--out", prefix])
    assert code == 0
    h, hit = read_csv(prefix + "_hitting.csv")
    assert h == ["t", "density", "survival"] and hit.shape == (20, 3)
    p = kummer.KummerParams(1, 1, 0.5)
    t = hit[:, 0].astype(float)
    assert np.allclose(hit[:, 1].astype(float), kummer.hitting_density(p, 1.0, t), rtol=1e-12)
    surv = hit[:, 2].astype(float)
    assert np.all(np.diff(surv) <= 1e-15)
    h, tr = read_csv(prefix + "_transition.csv")
    assert h == ["y", "density"] and tr.shape == (20, 2)
    h, atoms = read_csv(prefix + "_atoms.csv")
    assert h == ["n", "location", "mass"] and atoms.shape == (5, 3)
    assert np.allclose(atoms[:, 1].astype(float), 1.5 + np.arange(5))


def test_evolve_doa_case2(tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(["evolve", "doa", "--case", "2", "--alpha", "1", "--beta", "1", "--gamma", "0",
                        "--delta", "0.5", "--tmin", "0.5", "--tmax", "20", "--n-times", "4",
                        "--out", str(path)])
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["predicted_lambda"] == 0.5
    assert {"times", "ks_to_target", "tail_ratio_err", "measured_lambda", "coherence"} <= set(doc)
    header, rows = read_csv(tmp_path / "r.csv")
    assert header == ["t", "ks", "tail_ratio_err"] and rows.shape == (4, 3)


def test_mc_validate(tmp_path):
    path = tmp_path / "mc.csv"
    code, out, _ = run(["mc", "validate", "--n", "2000", "--seed", "3", "--n-points", "30", "--out", str(path)])
    assert code == 0
    header, rows = read_csv(path)
    assert header == ["t", "empirical_cdf", "closed_cdf"] and rows.shape == (30, 3)
    summary = json.loads((tmp_path / "mc.json").read_text())
    assert {"ks", "band", "censored", "absorbed", "n", "dt", "seed"} <= set(summary)
    assert summary["absorbed"] + summary["censored"] == 2000
    # same seed, same bytes
    first = path.read_bytes()
    run(["--threads", "2", "mc", "validate", "--n", "2000", "--seed", "3", "--n-points", "30", "--out", str(path)])
    assert path.read_bytes() == first


@pytest.mark.parametrize("argv", [
    ["qsd", "table", "--bogus", "1"],
    ["nosuch"],
    ["qsd", "table", "--lambda", "5"],
    ["qsd", "table", "--alpha", "-1"],
    ["qsd", "table", "--alpha", "1", "--beta", "0", "--gamma", "0"],
    ["evolve", "doa", "--case", "1", "--alpha", "1", "--beta", "1", "--gamma", "0"],
    ["evolve", "doa", "--case", "2", "--delta", "2"],
    ["mc", "validate", "--dt", "0"],
    ["verify-all", "--only", "11"],
    ["--threads", "0", "specfun-check"],
])
def test_bad_arguments_exit_2(argv, tmp_path, capsys):
    code, _, err = run(argv)
    assert code == 2
    assert "usage" in (err + capsys.readouterr().err).lower()


def test_numerical_failure_exit_1(tmp_path, monkeypatch):
    def broken(*a, **kw):
        raise FloatingPointError("overflow")
    monkeypatch.setattr(kummer, "hitting_density", broken)
    code, _, err = run(["kummer", "dump", "--out", str(tmp_path / "k")])
    assert code == 1
    assert "kummer.hitting_density" in err
    assert not list(tmp_path.iterdir())


def test_verify_all_failure_exit_3(capsys):
    code, out, _ = run(["verify-all", "--only", "8,9"])
    assert code == 3
    assert "[PASS]  8" in out and "[FAIL]  9" in out


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[qsd]\nalpha = 1.0\nbeta = 1.0\ngamma = 0.0\nlambda = 0.5\nn = 7\n')
    path = tmp_path / "q.csv"
    assert run(["--config", str(cfg), "qsd", "table", "--out", str(path)])[0] == 0
    _, rows = read_csv(path)
    assert rows.shape[0] == 7
    # flag beats file
    assert run(["--config", str(cfg), "qsd", "table", "--n", "3", "--out", str(path)])[0] == 0
    _, rows = read_csv(path)
    assert rows.shape[0] == 3
    assert run(["--config", str(cfg), "qsd", "table", "--lambda", "1", "--n", "3", "--out", str(path)])[0] == 0
    _, rows = read_csv(path)
    x, dens = rows[:, 0].astype(float), rows[:, 1].astype(float)
    assert np.allclose(dens, np.exp(-x), rtol=1e-9)


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[qsd]\nfrobnicate = 1\n")
    assert run(["--config", str(bad), "qsd", "table"])[0] == 2
    broken = tmp_path / "broken.toml"
    broken.write_text("[qsd\n")
    assert run(["--config", str(broken), "qsd", "table"])[0] == 2
    assert run(["--config", str(tmp_path / "missing.toml"), "qsd", "table"])[0] == 2


def test_write_atomic(tmp_path):
    path = tmp_path / "sub" / "f.txt"
    cli.write_atomic(str(path), "one\n")
    cli.write_atomic(str(path), "two\n")
    assert path.read_text() == "two\n"
    assert os.listdir(path.parent) == ["f.txt"]


def test_write_atomic_keeps_old_file_on_error(tmp_path, monkeypatch):
    path = tmp_path / "f.txt"
    path.write_text("old\n")

    def fail(src, dst):
        raise OSError("disk full")
    monkeypatch.setattr(os, "replace", fail)
    with pytest.raises(OSError):
        cli.write_atomic(str(path), "new\n")
    assert path.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["f.txt"]
