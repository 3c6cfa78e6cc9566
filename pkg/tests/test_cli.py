import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from preint import gaussian
from preint.cli import main
from preint.interp import Interpolant, chebyshev_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text, section=None):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return [r for r in rows if section is None or r["section"] == section]


def test_point_exact_linear(capsys):
    code, out, _ = run(capsys, "point", "--model", "linear", "--coeffs", "1", "--offset", "0", "--kind", "cdf",
                       "--t", "0", "--n", "1024", "--r", "4", "--seed", "1")
    assert code == 0
    (row,) = table(out)
    assert float(row["estimate"]) == 0.5 and float(row["stderr"]) == 0.0
    assert out.startswith("# preint point config_hash=")


def test_point_pdf_linear(capsys):
    code, out, _ = run(capsys, "point", "--kind", "pdf", "--model", "linear", "--coeffs", "2", "--offset", "1",
                       "--t", "1")
    assert code == 0
    assert float(table(out)[0]["estimate"]) == pytest.approx(0.5 / math.sqrt(2 * math.pi), rel=1e-14)


def test_missing_lattice_file(capsys, tmp_path):
    missing = tmp_path / "gone.txt"
    code, _, err = run(capsys, "point", "--t", "5", "--lattice", str(missing))
    assert code == 2
    assert str(missing) in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "point", "--config", str(tmp_path / "cfg.txt"))
    assert code == 2 and "cfg.txt" in err


def test_n_not_power_of_two(capsys):
    code, _, err = run(capsys, "point", "--t", "5", "--n", "1000")
    assert code == 2 and "power of two" in err
    code, _, _ = run(capsys, "converge", "--t", "5", "--n-list", "1024,3000")
    assert code == 2


def test_other_config_errors(capsys):
    assert run(capsys, "point", "--t", "5", "--r", "0")[0] == 2
    assert run(capsys, "point", "--t", "5", "--cov", "equicorr:x")[0] == 2
    assert run(capsys, "point", "--t", "5", "--n", str(2 ** 21))[0] == 2
    assert run(capsys, "point")[0] == 2
    assert run(capsys, "curve", "--interval", "3", "1")[0] == 2
    assert run(capsys, "converge", "--t", "5", "--interval", "1", "2")[0] == 2


def test_numerical_failure_exit_code(capsys):
    code, _, err = run(capsys, "point", "--t", "40", "--n", "1024", "--tol", "1e-300")
    assert code == 3
    assert "point" in err


def test_curve_of_exact_model(capsys):
    code, out, _ = run(capsys, "curve", "--model", "linear", "--coeffs", "1,0", "--interval", "-2", "2",
                       "--m", "8", "--n", "256", "--r", "2")
    assert code == 0
    nodes = table(out, "node")
    samples = table(out, "sample")
    assert len(nodes) == 9 and len(samples) == 201
    tn = np.array([float(r["t"]) for r in nodes])
    assert np.max(np.abs(np.array([float(r["value"]) for r in nodes]) - gaussian.cdf(tn))) <= 1e-15
    # the estimator is exact, so samples are the interpolant of the exact cdf
    g = chebyshev_grid(-2, 2, 8)
    exact = Interpolant(g, gaussian.cdf(g.nodes))
    ts = np.array([float(r["t"]) for r in samples])
    vals = np.array([float(r["value"]) for r in samples])
    assert np.max(np.abs(vals - exact(ts))) <= 1e-15
    assert np.max(np.abs(vals - gaussian.cdf(ts))) <= 3e-4
    code, out, _ = run(capsys, "curve", "--model", "linear", "--coeffs", "1,0", "--interval", "-2", "2",
                       "--m", "20", "--n", "256", "--r", "2")
    samples = table(out, "sample")
    ts = np.array([float(r["t"]) for r in samples])
    assert np.max(np.abs(np.array([float(r["value"]) for r in samples]) - gaussian.cdf(ts))) <= 1e-10


@pytest.mark.parametrize("kind", ["cdf", "pdf"])
def test_curve_shape_on_lognormal(capsys, kind):
    code, out, _ = run(capsys, "curve", "--cov", "recipmax:16", "--kind", kind, "--interval", "40", "100",
                       "--m", "21", "--n", "4096")
    assert code == 0
    vals = np.array([float(r["value"]) for r in table(out, "sample")])
    if kind == "cdf":
        assert np.all(np.diff(vals) >= 0)
    else:
        assert np.all(vals >= 0)


def test_converge_csv(capsys):
    code, out, _ = run(capsys, "converge", "--methods", "mc,qmc_preint", "--cov", "equicorr:16:1:0.5",
                       "--t", "40", "--r", "8")
    assert code == 0
    assert len(table(out)) == 14
    slopes = [ln for ln in out.splitlines() if ln.startswith("# slope,")]
    assert len(slopes) == 2


def test_converge_curve_study(capsys):
    code, out, _ = run(capsys, "converge", "--methods", "qmc_preint", "--cov", "equicorr:4:1:0.5",
                       "--interval", "2", "8", "--n-list", "512,1024", "--r", "4", "--reference", "4096,30,4")
    assert code == 0
    rows = table(out)
    assert [int(r["M"]) for r in rows] == [15, 16]
    assert all(float(r["rmise"]) > 0 for r in rows)


def test_time_csv(capsys):
    code, out, _ = run(capsys, "time", "--cov", "equicorr:8:1:0.5", "--t", "10", "--repeats", "1")
    assert code == 0
    rows = table(out)
    assert [int(r["N"]) for r in rows] == [2 ** 13, 2 ** 14, 2 ** 15, 2 ** 16]
    assert all(float(r["increase_factor"]) > 0 for r in rows)


def test_output_is_reproducible(capsys, tmp_path):
    args = ["converge", "--cov", "equicorr:6:1:0.5", "--t", "8", "--n-list", "256,512,1024", "--r", "3",
            "--seed", "11"]
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        assert main(args + ["--output", str(path)]) == 0
        outs.append([ln.rsplit(",", 1)[0] for ln in path.read_text().splitlines()])
    assert outs[0] == outs[1]
    args = ["curve", "--cov", "equicorr:6:1:0.5", "--interval", "3", "9", "--n", "512", "--seed", "2"]
    texts = [run(capsys, *args)[1] for _ in range(2)]
    keep = [[ln for ln in t.splitlines() if not ln.startswith("# wall_time")] for t in texts]
    assert keep[0] == keep[1]


def test_config_file_and_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# shared settings\nmodel = linear\ncoeffs = 1,1\nt = 0.5\nn = 512\nseed = 5\n"
                   "n_list = 512,1024\ninterval = -1 1\n")
    code, out, _ = run(capsys, "point", "--config", str(cfg))
    assert code == 0
    head = out.splitlines()[0]
    assert "seed=5" in head and "N=512" in head
    monkeypatch.setenv("PREINT_SEED", "9")
    assert "seed=9" in run(capsys, "point", "--config", str(cfg))[1].splitlines()[0]
    assert "seed=3" in run(capsys, "point", "--config", str(cfg), "--seed", "3")[1].splitlines()[0]
    code, out, _ = run(capsys, "point", "--config", str(cfg), "--n", "256")
    assert "N=256" in out.splitlines()[0]
    code, out, _ = run(capsys, "curve", "--config", str(cfg), "--m", "4", "--samples", "3")
    assert code == 0 and "interval=[-1;1]" in out.splitlines()[0]
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert run(capsys, "point", "--config", str(bad))[0] == 2


def test_lattice_sources(capsys, tmp_path):
    code, out, _ = run(capsys, "point", "--t", "5", "--cov", "equicorr:4:1:0.5", "--n", "1024",
                       "--lattice", "korobov:1571")
    assert code == 0 and "korobov" in out.splitlines()[0]
    vec = tmp_path / "z.txt"
    vec.write_text("1024\n1\n433\n229\n")
    code, out, _ = run(capsys, "point", "--t", "5", "--cov", "equicorr:4:1:0.5", "--n", "1024",
                       "--lattice", str(vec))
    assert code == 0


def test_check_command(capsys):
    code, out, _ = run(capsys, "check", "--cov", "recipmax:16")
    assert code == 0
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert lines and all(ln.startswith("PASS ") for ln in lines)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "preint.cli", "point", "--model", "linear", "--coeffs", "1,0",
                          "--t", "0", "--n", "16", "--r", "2"], capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert table(res.stdout)[0]["estimate"] == "0.5"
