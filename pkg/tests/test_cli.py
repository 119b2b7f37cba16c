
import numpy as np
import pytest
from scipy import special

from yukawa_ewald.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def data_rows(text):
    return [l for l in text.splitlines() if l and not l.startswith("#")]


def test_eval_is_byte_identical(capsys):
    a = run(capsys, "eval", "--n", "50", "--seed", "3", "--tol", "1e-10")
    b = run(capsys, "eval", "--n", "50", "--seed", "3", "--tol", "1e-10")
    assert a[0] == 0 and a[1] == b[1]
    assert len(data_rows(a[1])) == 51


def test_single_pair_matches_kernel(tmp_path, capsys):
    src = tmp_path / "s.csv"
    src.write_text("x,y,f\n1.0,1.0,1.0\n")
    tgt = tmp_path / "t.csv"
    tgt.write_text("x,y\n1.5,1.0\n")
    code, out, _ = run(capsys, "eval", "--sources", str(src), "--targets", f"file:{tgt}",
                       "--setting", "free", "--alpha", "2.0", "--tol", "1e-12")
    assert code == 0
    value = float(data_rows(out)[1].split(",")[2])
    assert value == pytest.approx(special.k0(1.0), abs=1e-10)


def test_bad_input_exit_3(tmp_path, capsys):
    src = tmp_path / "s.csv"
    src.write_text("x,y,f\n1.0,oops,1.0\n")
    code, _, err = run(capsys, "eval", "--sources", str(src))
    assert code == 3 and "line 2" in err
    code, _, _ = run(capsys, "eval", "--targets", "grid:3x4")
    assert code == 3
    code, _, _ = run(capsys, "eval", "--sources", str(tmp_path / "missing.csv"))
    assert code == 3


def test_bad_parameter_exit_2(capsys):
    code, _, err = run(capsys, "eval", "--n", "20", "--tol", "0.5")
    assert code == 2
    code, _, _ = run(capsys, "eval", "--n", "20", "--rc", "4.0", "--xi", "2.0")
    assert code == 2


def test_empty_sweep_range_writes_header_only(capsys):
    code, out, _ = run(capsys, "sweep", "--n", "20", "--range", "")
    assert code == 0
    assert data_rows(out) == ["xi,r_c,measured_rms,estimate"]


def test_bench_single_size_has_no_fit(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "200", "--tol", "1e-8")
    assert code == 0
    assert "exponent" not in out and len(data_rows(out)) == 2


def test_ongrid_matches_gather(capsys):
    common = ["eval", "--n", "30", "--targets", "grid:16x16", "--tol", "1e-11", "--grid-size", "64"]
    code, a, _ = run(capsys, *common)
    code2, b, _ = run(capsys, *common, "--ongrid")
    assert code == code2 == 0
    va = np.array([float(r.split(",")[2]) for r in data_rows(a)[1:]])
    vb = np.array([float(r.split(",")[2]) for r in data_rows(b)[1:]])
    assert np.max(np.abs(va - vb)) <= 1e-10


def test_ongrid_requires_lattice(capsys):
    code, _, _ = run(capsys, "eval", "--n", "10", "--ongrid")
    assert code == 3


def test_tune_command(capsys):
    code, out, _ = run(capsys, "tune", "--n", "100", "--tol", "1e-8")
    assert code == 0
    r_c, xi, k_inf, M = data_rows(out)[1].split(",")[:4]
    assert int(M) % 2 == 0 and float(k_inf) > float(xi) > 0


def test_timings_only_when_requested(capsys):
    _, out, _ = run(capsys, "eval", "--n", "10")
    assert "time_" not in out
    _, out, _ = run(capsys, "eval", "--n", "10", "--timings")
    assert "# time_total=" in out
