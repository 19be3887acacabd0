import csv
import subprocess
import sys

import numpy as np
import pytest

from fracspec.cache import OperatorCache, read_coefficients
from fracspec.cli import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    main,
)
from fracspec.evolve import initial_field
from fracspec.grid import make_grid


def _ini(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fracdiff_v1_level_one(tmp_path, capsys):
    cfg = _ini(tmp_path, "[fracdiff]\nfunction = v1\nalpha = 0\nN = 64\nL = 1.6\nlevels = 1\n")
    assert main(["fracdiff", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "fracdiff.csv")
    assert rows[0] == ["alpha", "x", "numerical", "exact", "abs_error"]
    errors = [float(r[4]) for r in rows[1:]]
    assert len(errors) == 64
    assert max(errors) <= 5.0137e-3
    assert "max_error=" in capsys.readouterr().out


def test_fracdiff_sech_sweep(tmp_path):
    alphas = ", ".join(str(a / 10) for a in range(11))
    cfg = _ini(tmp_path, f"[fracdiff]\nfunction = sech\nalphas = {alphas}\nN = 128\nL = 3.9\n")
    assert main(["fracdiff", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "fracdiff.csv")[1:]
    assert len({r[0] for r in rows}) == 11
    assert len(rows) == 11 * 128
    # exact values only at the endpoints
    assert all(r[3] == "" for r in rows if float(r[0]) not in (0.0, 1.0))


def test_fracdiff_constant_sample_file(tmp_path):
    samples = tmp_path / "const.csv"
    samples.write_text("value\n" + "\n".join(["2.5"] * 16) + "\n")
    cfg = _ini(tmp_path, f"[fracdiff]\nsample_file = {samples}\nalpha = 0.4\nN = 16\nL = 2\n")
    assert main(["fracdiff", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    values = [float(r[2]) for r in _rows(tmp_path / "fracdiff.csv")[1:]]
    assert values == [0.0] * 16


def test_fracdiff_unknown_function(tmp_path):
    cfg = _ini(tmp_path, "[fracdiff]\nfunction = v99\n")
    assert main(["fracdiff", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_validate_small_grid_and_determinism(tmp_path):
    args = ["validate", "--alpha-grid", "5", "--threads", "2"]
    cfg = _ini(tmp_path, "[validate]\ntables = testDam, testDamm+1\n")
    assert main(args + ["--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args[:3] + ["--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("table_testDam.csv", "curves_testDam.csv", "rates_testDam.csv",
                 "table_testDamm+1.csv", "rates_testDamm+1.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes(), name
    table = _rows(tmp_path / "a" / "table_testDam.csv")
    assert table[0] == ["levels", "v1", "v2", "v3"]
    assert [r[0] for r in table[1:]] == ["1", "2", "3", "4", "5", "6"]
    curves = _rows(tmp_path / "a" / "curves_testDam.csv")
    assert [float(r[0]) for r in curves[1:]] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_validate_unknown_table(tmp_path):
    cfg = _ini(tmp_path, "[validate]\ntables = nope\n")
    assert main(["validate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_solve_t_end_zero_is_datum(tmp_path):
    cfg = _ini(tmp_path, "[solve]\nN = 32\nL = 10\nt_end = 0\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "snapshots.csv")
    assert rows[0] == ["t", "x", "v"]
    assert len(rows) == 33
    x = np.array([float(r[1]) for r in rows[1:]])
    v = np.array([float(r[2]) for r in rows[1:]])
    assert np.array_equal(x, make_grid(32, 10.0).x_nodes)
    assert np.allclose(v, (1 - np.tanh(x)) / 2, atol=1e-13)
    final = read_coefficients(tmp_path / "final_coeffs.fsop")
    assert np.array_equal(final.coeffs, initial_field(32, 10.0).coeffs)


def test_solve_writes_snapshots_and_diagnostics(tmp_path, capsys):
    cfg = _ini(tmp_path, "[solve]\nalpha = 1/3\ntau = 1\nN = 32\nL = 10\ndt = 0.01\n"
                         "t_end = 0.5\nstride = 25\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    diag = _rows(tmp_path / "a" / "diagnostics.csv")
    assert diag[0] == ["step", "t", "position", "speed", "overshoot", "max", "min"]
    assert [r[0] for r in diag[1:]] == ["0", "25", "50"]
    snaps = _rows(tmp_path / "a" / "snapshots.csv")
    assert len(snaps) == 1 + 3 * 32
    for name in ("diagnostics.csv", "snapshots.csv", "final_coeffs.fsop"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_numeric_failure_exit_code(tmp_path):
    # a huge explicit step blows the nonlinear term up
    cfg = _ini(tmp_path, "[solve]\nN = 64\nL = 2\ndt = 5\nt_end = 1000\ntau = 1e-6\n"
                         "datum = v3\nstride = 1000\nlevels = 1\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == EXIT_NUMERIC


@pytest.mark.parametrize("body", [
    "tau = -1", "tau = 0", "dt = abc", "N = 7", "N = 2", "alpha = 1.5",
    "levels = 1,3", "dealias = maybe", "t_end = 0.015",
])
def test_solve_config_errors(tmp_path, body):
    cfg = _ini(tmp_path, "[solve]\n" + body + "\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.ini")]) == EXIT_CONFIG


def test_bad_arguments():
    assert main(["nosuchcommand"]) == EXIT_CONFIG
    assert main(["validate", "--alpha-grid", "1"]) == EXIT_CONFIG


def test_budget_refusal(tmp_path):
    cfg = _ini(tmp_path, "[solve]\nN = 2048\nlevels = 1,2,3,4,5,6,7,8,9\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == EXIT_BUDGET


def test_cache_build_list_purge(tmp_path, capsys):
    cache_dir = tmp_path / "cache"
    cfg = _ini(tmp_path, "[cache]\nalpha = 1/3\nN = 16\nlevels = 1,2,3\n")
    base = ["--config", cfg, "--cache-dir", str(cache_dir)]
    assert main(["cache", "build"] + base) == EXIT_OK
    capsys.readouterr()
    assert main(["cache", "list"] + base) == EXIT_OK
    out = capsys.readouterr().out
    assert "N=16 levels=1-2-3" in out and "sha256=" in out
    first = next(cache_dir.iterdir()).read_bytes()
    assert main(["cache", "purge"] + base) == EXIT_OK
    assert main(["cache", "build"] + base) == EXIT_OK
    assert next(cache_dir.iterdir()).read_bytes() == first
    assert main(["cache", "purge"] + base) == EXIT_OK
    with pytest.raises(KeyError):
        OperatorCache(cache_dir).load(1 / 3, 16, (1, 2, 3))


def test_cache_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _ini(tmp_path, "[cache]\nN = 8\nlevels = 1\n")
    code = main(["cache", "build", "--config", cfg, "--cache-dir", str(blocker / "sub")])
    assert code == EXIT_IO


def test_solve_uses_cache(tmp_path):
    cfg = _ini(tmp_path, f"[solve]\nN = 16\nL = 5\nt_end = 0.02\ncache_dir = {tmp_path / 'c'}\n"
                         "levels = 1,2\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert len(OperatorCache(tmp_path / "c").entries()) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fracspec", "--help"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    for cmd in ("fracdiff", "validate", "solve", "cache"):
        assert cmd in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "fracspec", "validate", "--help"],
                          capture_output=True, text=True, check=False)
    for flag in ("--config", "--out", "--alpha-grid", "--threads", "--full-scale"):
        assert flag in proc.stdout
