import csv
import io

import pytest
import yaml

from qfeedback.cli import main


def run(argv):
    buf = io.StringIO()
    code = main(argv, stdout=buf)
    return code, buf.getvalue()


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_steady_single():
    code, out = run(["steady", "--kappa", "0.25"])
    assert code == 0
    r = rows(out)
    assert r[0] == ["kappa", "x", "y", "z", "E", "u", "v", "rate"]
    vals = [float(v) for v in r[1]]
    assert vals[1:4] == pytest.approx([0.4961967868047122, 0.511467940771979, 0.12310562561766053], abs=1e-15)
    assert vals[7] == pytest.approx(0.12404919670117805, abs=1e-15)


def test_steady_grid_monotone():
    code, out = run(["steady", "--kappa-grid", "0.01:16:log:25"])
    assert code == 0
    r = rows(out)[1:]
    assert len(r) == 25
    z = [float(row[3]) for row in r]
    assert all(b > a for a, b in zip(z, z[1:]))


@pytest.mark.parametrize("argv", [["steady", "--kappa", "0"], ["steady", "--kappa", "-1"],
                                  ["steady", "--kappa-grid", "1:2:cubic:3"], ["moments", "--preset", "nope"],
                                  ["steady", "--kappa", "abc"]])
def test_invalid_input_exit_code(argv):
    assert run(argv)[0] == 2


def test_unknown_config_key(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("kappa: 0.25\nwidth: 3\n")
    assert run(["moments", "--config", str(p)])[0] == 2


def test_numerical_failure_exit_code(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("kappa: 16.0\ndtau: 0.5\ntau_end: 10.0\nrecord_stride: 1\ninitial: {x: 5.0, y: 5.0, z: 0.0}\n")
    assert run(["moments", "--config", str(p)])[0] == 3


def test_moments_fig1():
    code, out = run(["moments", "--preset", "fig1"])
    r = rows(out)
    assert r[0] == ["tau", "x", "y", "z", "defect"]
    last = [float(v) for v in r[-1]]
    assert last[0] == 50.0
    assert last[1:4] == pytest.approx([0.4961967868047122, 0.511467940771979, 0.12310562561766053], abs=1e-5)
    d = [float(row[4]) for row in r[1:]]
    assert max(abs(v) for v in d) < 1e-9


def test_print_config_round_trip(tmp_path):
    code, printed = run(["moments", "--preset", "fig1", "--print-config"])
    assert code == 0
    conf = yaml.safe_load(printed)
    assert conf["kappa"] == 0.25 and "dtau" in conf
    p = tmp_path / "c.yaml"
    p.write_text(printed)
    assert run(["moments", "--config", str(p)])[1] == run(["moments", "--preset", "fig1"])[1]


def test_ensemble_bytes_stable_across_workers(tmp_path):
    base = ["ensemble", "--preset", "fig3", "--n-traj", "8", "--seed", "3"]
    assert main(base + ["--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(base + ["--out", str(tmp_path / "b"), "--workers", "4"]) == 0
    a = (tmp_path / "a" / "ensemble.csv").read_bytes()
    assert a == (tmp_path / "b" / "ensemble.csv").read_bytes()
    assert a.startswith(b"tau,meanQ,stdQ,meanP,stdP,meanE,stdE\n")
    man = yaml.safe_load((tmp_path / "a" / "manifest.yaml").read_text())
    assert man["seed"] == 3 and man["config"]["n_traj"] == 8 and "numpy" in man["versions"]


def test_ensemble_seed_changes_output():
    a = run(["ensemble", "--n-traj", "2", "--seed", "1"])[1]
    b = run(["ensemble", "--n-traj", "2", "--seed", "2"])[1]
    assert a != b


def test_grid_writes_snapshots(tmp_path):
    out = tmp_path / "g"
    assert main(["grid", "--preset", "fig4b", "--tau-end", "2", "--out", str(out)]) == 0
    series = rows((out / "series.csv").read_text())
    assert series[0] == ["tau", "norm", "q", "p", "varq", "varp", "cov", "skewq", "energy"]
    snap = rows((out / "snapshot_0000.csv").read_text())
    assert snap[0] == ["q", "density"] and len(snap) == 1025
    assert (out / "snapshot_0001.csv").exists()


def test_fock_thermal_check(tmp_path):
    code, out = run(["fock", "--preset", "thermal-check"])
    assert code == 0
    r = rows(out)
    assert r[0] == ["t", "n_mean", "trace", "purity", "leak"]
    assert float(r[-1][1]) == pytest.approx(0.125, rel=0.02)


def test_design_reports(capsys):
    code, out = run(["design", "--kappa", "0.25"])
    assert code == 0
    table = dict(rows(out)[1:])
    assert float(table["u"]) == pytest.approx(0.03077640640441513)
    assert table["regime"] == "cooling"
    code, out = run(["design", "--kappa", "0.01", "--u", "0", "--v", "-0.01"])
    assert float(dict(rows(out)[1:])["T_eff"]) == 0.0
    code, out = run(["design", "--kappa", "0.25", "--v", "0.1"])
    assert code == 0 and dict(rows(out)[1:])["regime"] == "heating"
    assert "HeatingRegime" in capsys.readouterr().err or "heating" in out


def test_design_kelvin():
    code, out = run(["design", "--kappa", "0.01", "--u", "0", "--v", "-0.02", "--omega-si", "6.283185307179586e6"])
    table = dict(rows(out)[1:])
    assert float(table["T_kelvin"]) == pytest.approx(0.45511961331341877 * 4.799243073366221e-05, rel=1e-9)
